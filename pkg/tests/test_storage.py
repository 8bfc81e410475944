"""Tests for SCNN weight files, SCAE adversarial sets and report files"""
import json
import struct

import numpy as np
import pytest

from app.models.network import build_lenet5
from app.schemas.report import EpochMetrics, EvalReport, EvalRow, Phase, ScLayer
from app.storage.adversarial import (
    RECORD_DTYPE,
    AdversarialRecord,
    load_adversarial_set,
    parse_adversarial_set,
    save_adversarial_set,
    serialize_adversarial_set,
)
from app.storage.reports import report_to_csv, report_to_json, rows_from_csv, write_report, write_sidecar
from app.storage.weights import load_weights, parse_weights, save_weights, serialize_weights
from app.utils.errors import FormatError, LengthError, MissingArtifactError
from tests.conftest import make_tiny_model


@pytest.fixture
def record():
    pixels = np.linspace(0, 1, 784, dtype=np.float32).reshape(1, 28, 28)
    return AdversarialRecord(true_label=3, target=4, success=True, l2=1.25, pixels=pixels)


def test_weight_file_layout(tiny_model):
    """Test the byte layout of a serialized conv + dense model"""
    # Act
    raw = serialize_weights(tiny_model)

    # Assert
    assert raw[:8] == b"SCNN" + struct.pack("<HH", 1, 6)
    assert raw[8:26] == struct.pack("<BB4I", 1, 4, 2, 1, 3, 3)
    conv = tiny_model.layers[0]
    assert raw[26:98] == conv.weight.astype("<f4").tobytes()
    assert raw[98:106] == conv.bias.astype("<f4").tobytes()
    assert raw[106:112] == bytes([4, 0, 2, 0, 6, 0])
    assert raw[112:122] == struct.pack("<BB2I", 3, 2, 3, 8)
    assert raw[-2:] == bytes([5, 0])
    assert len(raw) == 232


def test_weights_round_trip(tmp_path):
    """Test that save/load reproduces LeNet-5 parameters exactly"""
    # Arrange
    model = build_lenet5(rng=np.random.default_rng(11))
    path = tmp_path / "lenet5.scnn"

    # Act
    save_weights(model, path)
    loaded = load_weights(path)

    # Assert
    for original, restored in zip(model.params(), loaded.params()):
        for name in original:
            assert np.array_equal(original[name], restored[name])
    assert serialize_weights(loaded) == path.read_bytes()


def test_weights_load_into_custom_template(tmp_path, rng):
    """Test loading into a non-LeNet template"""
    # Arrange
    model = make_tiny_model(rng)
    path = save_weights(model, tmp_path / "tiny.scnn")

    # Act
    loaded = load_weights(path, template=make_tiny_model(np.random.default_rng(0)))

    # Assert
    assert np.array_equal(loaded.layers[4].weight, model.layers[4].weight)


def test_weights_architecture_mismatch(tmp_path, tiny_model):
    """Test that a file for another architecture is rejected"""
    path = save_weights(tiny_model, tmp_path / "tiny.scnn")
    with pytest.raises(FormatError):
        load_weights(path)


def test_weights_bad_magic_and_version(tiny_model):
    """Test magic and version checks"""
    raw = serialize_weights(tiny_model)
    with pytest.raises(FormatError):
        parse_weights(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        parse_weights(raw[:4] + struct.pack("<H", 2) + raw[6:])


def test_weights_truncated_and_trailing(tiny_model):
    """Test truncated payloads and trailing garbage"""
    raw = serialize_weights(tiny_model)
    with pytest.raises(LengthError):
        parse_weights(raw[:-10])
    with pytest.raises(FormatError):
        parse_weights(raw + b"\x00")


def test_weights_unknown_kind_tag(tiny_model):
    """Test that an unknown layer tag is a format error"""
    raw = bytearray(serialize_weights(tiny_model))
    raw[8] = 99
    with pytest.raises(FormatError):
        parse_weights(bytes(raw))


def test_missing_weights_name_train_command(tmp_path):
    """Test the actionable error for a missing weight file"""
    with pytest.raises(MissingArtifactError) as exc_info:
        load_weights(tmp_path / "nope.scnn")
    assert "python -m app.main train" in str(exc_info.value)


def test_adversarial_record_layout(record):
    """Test the SCAE header and fixed-size record layout"""
    # Act
    raw = serialize_adversarial_set([record, record])

    # Assert
    assert RECORD_DTYPE.itemsize == 3143
    assert raw[:10] == b"SCAE" + struct.pack("<HI", 1, 2)
    assert raw[10:13] == bytes([3, 4, 1])
    assert raw[13:17] == struct.pack("<f", 1.25)
    assert raw[17:21] == struct.pack("<f", 0.0)
    assert len(raw) == 10 + 2 * 3143


def test_adversarial_round_trip(tmp_path, record):
    """Test save/load of an adversarial set"""
    # Arrange
    failed = AdversarialRecord(true_label=9, target=0, success=False, l2=0.0, pixels=np.zeros((1, 28, 28)))
    path = tmp_path / "adv.scae"

    # Act
    save_adversarial_set([record, failed], path)
    loaded = load_adversarial_set(path)

    # Assert
    assert [(r.true_label, r.target, r.success) for r in loaded] == [(3, 4, True), (9, 0, False)]
    assert loaded[0].l2 == 1.25
    assert np.array_equal(loaded[0].pixels, record.pixels)
    assert loaded[0].pixels.shape == (1, 28, 28)


def test_adversarial_format_errors(record):
    """Test magic, version and length checks on SCAE data"""
    raw = serialize_adversarial_set([record])
    with pytest.raises(FormatError):
        parse_adversarial_set(b"SCNN" + raw[4:])
    with pytest.raises(FormatError):
        parse_adversarial_set(raw[:4] + struct.pack("<H", 7) + raw[6:])
    with pytest.raises(LengthError):
        parse_adversarial_set(raw[:-1])
    with pytest.raises(LengthError):
        parse_adversarial_set(b"SCA")


def test_missing_adversarial_set_names_attack_command(tmp_path):
    """Test the actionable error for a missing SCAE file"""
    with pytest.raises(MissingArtifactError) as exc_info:
        load_adversarial_set(tmp_path / "adv.scae")
    assert "python -m app.main attack" in str(exc_info.value)


@pytest.fixture
def report():
    rows = [
        EvalRow(sc_layer=ScLayer.FIRST, bitstream_len=16, phase=Phase.AFTER_ATTACK, accuracy=0.75, num_images=4, seed=1),
        EvalRow(sc_layer=ScLayer.NONE, bitstream_len=0, phase=Phase.BEFORE_ATTACK, accuracy=1.0, num_images=8, seed=1),
        EvalRow(sc_layer=ScLayer.FIRST, bitstream_len=8, phase=Phase.BEFORE_ATTACK, accuracy=0.875, num_images=8, seed=1),
    ]
    return EvalReport(rows=rows, weights_path="w.scnn", adversarial_path="a.scae")


def test_report_csv_golden(report):
    """Test the frozen CSV header and canonical row order"""
    # Act
    text = report_to_csv(report)

    # Assert
    assert text == (
        "sc_layer,bitstream_len,phase,accuracy,num_images,seed,wall_time_s\n"
        "none,0,before_attack,1.0,8,1,0.0\n"
        "first,8,before_attack,0.875,8,1,0.0\n"
        "first,16,after_attack,0.75,4,1,0.0\n"
    )


def test_report_csv_and_json_agree(tmp_path, report):
    """Test that both formats encode the same rows"""
    # Act
    write_report(report, tmp_path / "r.csv", tmp_path / "r.json")

    # Assert
    from_csv = rows_from_csv((tmp_path / "r.csv").read_text())
    from_json = EvalReport.model_validate_json((tmp_path / "r.json").read_text())
    assert from_csv == from_json.rows == report.rows
    assert report_to_json(from_json) == (tmp_path / "r.json").read_text()


def test_report_rejects_duplicate_cells(report):
    """Test that each (layer, N, phase) appears at most once"""
    with pytest.raises(ValueError):
        EvalReport(rows=report.rows + [report.rows[0]])


def test_sidecar_is_json_list(tmp_path):
    """Test sidecar serialization of epoch metrics"""
    # Act
    path = write_sidecar([EpochMetrics(epoch=1, train_loss=0.5)], tmp_path / "m.json")

    # Assert
    assert json.loads(path.read_text()) == [{"epoch": 1, "train_loss": 0.5, "test_accuracy": None, "wall_time_s": 0.0}]
