import numpy as np
import pytest

from oppeval import ValidationError
from oppeval.signal_io import (
    AnnotationSet,
    EdfError,
    Recording,
    load_csv,
    parse_edf,
    parse_summary,
    save_csv,
    session_timeline,
)


def _pad(text, width):
    return text.ljust(width)[:width].encode("ascii")


def build_edf(n_signals=2, samples_per_record=256, n_records=10, record_duration="1",
              phys_min=-100.0, phys_max=100.0, dig_min=-32768, dig_max=32767,
              labels=None, digital=None, spr_override=None):
    """Assemble EDF bytes from scratch so header arithmetic is fully controlled."""
    labels = labels or [f"CH{i}" for i in range(n_signals)]
    header_bytes = 256 + 256 * n_signals
    fixed = b"".join([
        _pad("0", 8), _pad("test patient", 80), _pad("test recording", 80),
        _pad("01.01.11", 8), _pad("13.43.04", 8), _pad(str(header_bytes), 8),
        _pad("", 44), _pad(str(n_records), 8), _pad(str(record_duration), 8),
        _pad(str(n_signals), 4),
    ])
    spr = spr_override or [samples_per_record] * n_signals
    per_signal = b"".join([
        b"".join(_pad(lbl, 16) for lbl in labels),
        b"".join(_pad("", 80) for _ in range(n_signals)),
        b"".join(_pad("uV", 8) for _ in range(n_signals)),
        b"".join(_pad(str(phys_min), 8) for _ in range(n_signals)),
        b"".join(_pad(str(phys_max), 8) for _ in range(n_signals)),
        b"".join(_pad(str(dig_min), 8) for _ in range(n_signals)),
        b"".join(_pad(str(dig_max), 8) for _ in range(n_signals)),
        b"".join(_pad("", 80) for _ in range(n_signals)),
        b"".join(_pad(str(n), 8) for n in spr),
        b"".join(_pad("", 32) for _ in range(n_signals)),
    ])
    if digital is None:
        digital = np.zeros((n_records, n_signals, samples_per_record), dtype=np.int16)
    return fixed + per_signal + digital.astype("<i2").tobytes()


class TestParseEdf:
    def test_header_arithmetic(self):
        data = build_edf(n_signals=23, samples_per_record=256, n_records=10)
        rec = parse_edf(data)
        assert rec.samples.shape == (2560, 23)
        assert rec.sample_rate_hz == 256.0

    def test_digital_min_maps_to_physical_min(self):
        digital = np.full((1, 1, 4), -32768, dtype=np.int16)
        rec = parse_edf(build_edf(n_signals=1, samples_per_record=4, n_records=1,
                                  digital=digital))
        assert np.allclose(rec.samples, -100.0)

    def test_digital_max_maps_to_physical_max(self):
        digital = np.full((1, 1, 4), 32767, dtype=np.int16)
        rec = parse_edf(build_edf(n_signals=1, samples_per_record=4, n_records=1,
                                  digital=digital))
        assert np.allclose(rec.samples, 100.0)

    def test_scalp_archive_shape(self):
        # header layout matching the archive's hour-long 23-channel files
        data = build_edf(n_signals=23, samples_per_record=256, n_records=3600)
        rec = parse_edf(data)
        assert rec.n_channels == 23
        assert rec.sample_rate_hz == 256.0
        assert rec.duration_s == 3600.0

    def test_linear_map_monotone(self):
        rng = np.random.default_rng(3)
        digital = rng.integers(-32768, 32767, size=(2, 1, 64), dtype=np.int16)
        rec = parse_edf(build_edf(n_signals=1, samples_per_record=64, n_records=2,
                                  digital=digital))
        flat_dig = digital.reshape(-1).astype(float)
        order = np.argsort(flat_dig, kind="mergesort")
        assert np.all(np.diff(rec.samples.reshape(-1)[order]) >= 0)

    def test_record_interleaving(self):
        # two signals, values distinct per (record, signal) to spot transposition bugs
        digital = np.arange(2 * 2 * 4, dtype=np.int16).reshape(2, 2, 4)
        rec = parse_edf(build_edf(n_signals=2, samples_per_record=4, n_records=2,
                                  phys_min=-32768, phys_max=32767))
        rec = parse_edf(build_edf(n_signals=2, samples_per_record=4, n_records=2,
                                  phys_min=-32768.0, phys_max=32767.0, digital=digital))
        assert list(rec.samples[:, 0]) == [0, 1, 2, 3, 8, 9, 10, 11]
        assert list(rec.samples[:, 1]) == [4, 5, 6, 7, 12, 13, 14, 15]

    def test_truncated_payload_names_offset(self):
        data = build_edf(n_signals=1, samples_per_record=16, n_records=4)
        with pytest.raises(EdfError, match="byte offset"):
            parse_edf(data[:-10])

    def test_inconsistent_rates_rejected(self):
        data = build_edf(n_signals=2, spr_override=[256, 128])
        with pytest.raises(EdfError, match="samples per record"):
            parse_edf(data)

    def test_annotation_signal_rejected(self):
        data = build_edf(n_signals=2, labels=["CH0", "EDF Annotations"])
        with pytest.raises(EdfError, match="EDF\\+"):
            parse_edf(data)

    def test_unknown_record_count_rejected(self):
        data = build_edf(n_records=10)
        bad = data[:236] + _pad("-1", 8) + data[244:]
        with pytest.raises(EdfError, match="-1"):
            parse_edf(bad)

    def test_malformed_header_number(self):
        data = build_edf()
        bad = data[:252] + _pad("abc", 4) + data[256:]
        with pytest.raises(EdfError):
            parse_edf(bad)


SUMMARY_SIMPLE = """\
Data Sampling Rate: 256 Hz

Channels in EDF Files:
Channel 1: C01
Channel 2: C02

File Name: chb01_01.edf
File Start Time: 11:42:54
File End Time: 12:42:54
Number of Seizures in File: 0

File Name: chb01_03.edf
File Start Time: 13:43:04
File End Time: 14:43:04
Number of Seizures in File: 1
Seizure Start Time: 2996 seconds
Seizure End Time: 3036 seconds
"""

SUMMARY_NUMBERED = """\
File Name: chb15_06.edf
File Start Time: 01:00:00
File End Time: 02:00:00
Number of Seizures in File: 2
Seizure 1 Start Time: 272 seconds
Seizure 1 End Time: 397 seconds
Seizure 2 Start Time: 1862 seconds
Seizure 2 End Time: 1963 seconds
"""


class TestParseSummary:
    def test_zero_seizure_block(self):
        anns = parse_summary(SUMMARY_SIMPLE)
        assert anns["chb01_01.edf"].events == []

    def test_declared_times(self):
        anns = parse_summary(SUMMARY_SIMPLE)
        assert anns["chb01_03.edf"].events == [(2996.0, 3036.0)]

    def test_numbered_variant_two_sorted(self):
        anns = parse_summary(SUMMARY_NUMBERED)
        assert anns["chb15_06.edf"].events == [(272.0, 397.0), (1862.0, 1963.0)]

    def test_blank_line_insensitive(self):
        squeezed = SUMMARY_SIMPLE.replace("\n\n", "\n")
        padded = SUMMARY_SIMPLE.replace("\n\n", "\n\n\n\n")
        assert parse_summary(squeezed) == parse_summary(SUMMARY_SIMPLE)
        assert parse_summary(padded) == parse_summary(SUMMARY_SIMPLE)

    def test_count_mismatch_names_block(self):
        bad = SUMMARY_SIMPLE.replace("Number of Seizures in File: 1",
                                     "Number of Seizures in File: 2")
        with pytest.raises(ValidationError, match="chb01_03.edf"):
            parse_summary(bad)

    def test_clock_times_captured(self):
        anns = parse_summary(SUMMARY_SIMPLE)
        assert anns["chb01_03.edf"].start_clock_s == 13 * 3600 + 43 * 60 + 4

    def test_timeline_midnight_wrap(self):
        text = (
            "File Name: a.edf\nFile Start Time: 23:30:00\nFile End Time: 24:30:00\n"
            "Number of Seizures in File: 0\n"
            "File Name: b.edf\nFile Start Time: 00:31:00\nFile End Time: 01:31:00\n"
            "Number of Seizures in File: 0\n"
        )
        tl = session_timeline(parse_summary(text))
        assert tl["b.edf"] - tl["a.edf"] == pytest.approx(3660.0)

    def test_timeline_hours_past_24_accepted(self):
        text = (
            "File Name: a.edf\nFile Start Time: 23:30:00\nFile End Time: 24:30:00\n"
            "Number of Seizures in File: 0\n"
            "File Name: b.edf\nFile Start Time: 26:12:23\nFile End Time: 27:12:23\n"
            "Number of Seizures in File: 0\n"
        )
        tl = session_timeline(parse_summary(text))
        assert tl["b.edf"] - tl["a.edf"] == pytest.approx(2 * 3600 + 42 * 60 + 23)


class TestCsvContainer:
    def test_shape_contract(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("A,B\n" + "\n".join(f"{i},{i + 0.5}" for i in range(512)))
        rec = load_csv(path, sample_rate_hz=256.0)
        assert rec.samples.shape == (512, 2)
        assert rec.duration_s == 2.0
        assert rec.channel_labels == ["A", "B"]

    def test_five_second_block(self, tmp_path):
        path = tmp_path / "r.csv"
        rng = np.random.default_rng(0)
        data = rng.normal(size=(1280, 23))
        np.savetxt(path, data, delimiter=",", comments="",
                   header=",".join(f"C{i:02d}" for i in range(23)))
        rec = load_csv(path, sample_rate_hz=256.0)
        assert rec.samples.shape == (1280, 23)
        assert rec.duration_s == 5.0

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValidationError):
            load_csv(path, sample_rate_hz=256.0)

    def test_non_numeric_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("A,B\n1,2\nx,4\n")
        with pytest.raises(ValidationError):
            load_csv(path, sample_rate_hz=256.0)

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        rec = Recording(patient_id="p", channel_labels=["A", "B", "C"],
                        sample_rate_hz=256.0, samples=rng.normal(size=(300, 3)))
        path = tmp_path / "rt.csv"
        save_csv(rec, path)
        back = load_csv(path, sample_rate_hz=256.0)
        assert np.array_equal(back.samples, rec.samples)


class TestAnnotationSet:
    def test_overlap_rejected(self):
        with pytest.raises(ValidationError):
            AnnotationSet(file_name="x", events=[(10.0, 50.0), (40.0, 80.0)])

    def test_inverted_interval_rejected(self):
        with pytest.raises(ValidationError):
            AnnotationSet(file_name="x", events=[(50.0, 10.0)])
