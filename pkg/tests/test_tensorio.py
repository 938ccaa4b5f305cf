import numpy as np
import pytest

from starseg import tensorio
from starseg.errors import (
    ClassOutOfRange,
    DuplicateId,
    FortranOrderUnsupported,
    MalformedHeader,
    MalformedJson,
    UnsupportedDtype,
)
from starseg.tensorio import TensorFile


def test_zero_tensor_roundtrip(tmp_path):
    t = TensorFile(shape=(2, 2), dtype="float32", payload=b"\x00" * 16)
    p = tmp_path / "z.npy"
    tensorio.write_tensor(p, t)
    back = tensorio.read_tensor(p)
    assert back.shape == (2, 2)
    assert back.dtype == "float32"
    assert back.payload == b"\x00" * 16


def test_bad_magic_rejected(tmp_path):
    p = tmp_path / "bad.npy"
    p.write_bytes(b"NOTNPY" + b"\x00" * 64)
    with pytest.raises(MalformedHeader):
        tensorio.read_tensor(p)


def test_v2_rejected(tmp_path):
    p = tmp_path / "v2.npy"
    p.write_bytes(b"\x93NUMPY\x02\x00" + b"\x00" * 64)
    with pytest.raises(MalformedHeader):
        tensorio.read_tensor(p)


def test_random_roundtrip_byte_exact(tmp_path):
    rng = np.random.default_rng(42)
    a = rng.random((3, 4, 7)).astype(np.float32)
    t = TensorFile.from_array(a)
    p = tmp_path / "r.npy"
    tensorio.write_tensor(p, t)
    back = tensorio.read_tensor(p)
    assert back == t
    assert np.array_equal(back.to_array(), a)


def test_numpy_can_read_our_files(tmp_path):
    # the format is the public NPY v1.0, so numpy must agree with us
    a = np.arange(12, dtype=np.int32).reshape(3, 4)
    p = tmp_path / "np.npy"
    tensorio.write_array(p, a)
    assert np.array_equal(np.load(p), a)


def test_we_can_read_numpy_files(tmp_path):
    a = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    p = tmp_path / "np.npy"
    np.save(p, a)
    assert np.array_equal(tensorio.read_array(p), a)


def test_single_element_roundtrip(tmp_path):
    a = np.array([[7]], dtype=np.int32)
    p = tmp_path / "one.npy"
    tensorio.write_array(p, a)
    assert np.array_equal(tensorio.read_array(p), a)


def test_file_size_is_header_plus_payload(tmp_path):
    a = np.zeros((256, 256, 65), dtype=np.float32)
    p = tmp_path / "big.npy"
    tensorio.write_array(p, a)
    # header region is padded to a multiple of 64; this shape fits in 128
    assert p.stat().st_size == 128 + 256 * 256 * 65 * 4


def test_invalid_payload_rejected_before_io(tmp_path):
    t = TensorFile(shape=(2, 2), dtype="float32", payload=b"\x00" * 15)
    p = tmp_path / "never.npy"
    with pytest.raises(MalformedHeader):
        tensorio.write_tensor(p, t)
    assert not p.exists()


def test_fortran_order_rejected(tmp_path):
    a = np.asfortranarray(np.arange(6, dtype=np.float32).reshape(2, 3))
    p = tmp_path / "f.npy"
    np.save(p, a)
    with pytest.raises(FortranOrderUnsupported):
        tensorio.read_tensor(p)


def test_unsupported_dtype_rejected(tmp_path):
    p = tmp_path / "f8.npy"
    np.save(p, np.zeros((2, 2), dtype=np.float64))
    with pytest.raises(UnsupportedDtype):
        tensorio.read_tensor(p)


def test_rank_1_rejected(tmp_path):
    p = tmp_path / "r1.npy"
    np.save(p, np.zeros(5, dtype=np.float32))
    with pytest.raises(MalformedHeader):
        tensorio.read_tensor(p)


def test_short_payload_is_error_not_truncation(tmp_path):
    a = np.zeros((4, 4), dtype=np.float32)
    p = tmp_path / "short.npy"
    tensorio.write_array(p, a)
    raw = p.read_bytes()
    p.write_bytes(raw[:-8])
    with pytest.raises(MalformedHeader):
        tensorio.read_tensor(p)


def test_header_whitespace_tolerated(tmp_path):
    # hand-built header with unusual internal whitespace
    head = "{ 'descr' :  '<i4' ,'fortran_order'  : False , 'shape' : (2,  2) }"
    pad = (64 - (10 + len(head) + 1) % 64) % 64
    header = (head + " " * pad + "\n").encode()
    p = tmp_path / "ws.npy"
    p.write_bytes(b"\x93NUMPY\x01\x00" + len(header).to_bytes(2, "little")
                  + header + np.arange(4, dtype="<i4").tobytes())
    t = tensorio.read_tensor(p)
    assert t.shape == (2, 2) and t.dtype == "int32"


class TestClassAssignment:
    def test_direct_parse(self, tmp_path):
        p = tmp_path / "a.classes.json"
        p.write_text('{"1": 2, "2": 2}')
        assert tensorio.read_class_assignment(p) == {1: 2, 2: 2}

    def test_background_id_rejected(self, tmp_path):
        p = tmp_path / "bg.classes.json"
        p.write_text('{"0": 1}')
        with pytest.raises(DuplicateId):
            tensorio.read_class_assignment(p)

    def test_duplicate_key_rejected(self, tmp_path):
        p = tmp_path / "dup.classes.json"
        p.write_text('{"3": 1, "3": 2}')
        with pytest.raises(DuplicateId):
            tensorio.read_class_assignment(p)

    def test_class_out_of_range(self, tmp_path):
        p = tmp_path / "oor.classes.json"
        p.write_text('{"1": 7}')
        with pytest.raises(ClassOutOfRange):
            tensorio.read_class_assignment(p, n_classes=6)
        p.write_text('{"1": 0}')
        with pytest.raises(ClassOutOfRange):
            tensorio.read_class_assignment(p)

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.classes.json"
        p.write_text("[1, 2, 3]")
        with pytest.raises(MalformedJson):
            tensorio.read_class_assignment(p)
        p.write_text("{nope")
        with pytest.raises(MalformedJson):
            tensorio.read_class_assignment(p)

    def test_random_roundtrip(self, tmp_path):
        rng = np.random.default_rng(7)
        assignment = {int(i): int(rng.integers(1, 7)) for i in range(1, 51)}
        p = tmp_path / "rt.classes.json"
        tensorio.write_class_assignment(p, assignment)
        assert tensorio.read_class_assignment(p, n_classes=6) == assignment
