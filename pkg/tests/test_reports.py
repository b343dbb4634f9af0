import dataclasses
import json

import numpy as np
import pytest

from qsdlab.reports import (
    ToleranceProfile,
    canonical_json,
    config_digest,
    write_report,
    write_series,
)


def _without_timestamp(text: str) -> str:
    lines = text.splitlines()
    assert sum('"timestamp"' in ln for ln in lines) == 1
    return "\n".join(ln for ln in lines if '"timestamp"' not in ln)


class TestWriteReport:
    def test_repeat_runs_identical_modulo_timestamp(self, tmp_path):
        content = {"lambda0": 0.5, "series": [1.0, 2.5], "nested": {"ok": True}}
        write_report(tmp_path / "a.json", dict(content))
        write_report(tmp_path / "b.json", dict(content))
        a = (tmp_path / "a.json").read_text()
        b = (tmp_path / "b.json").read_text()
        assert _without_timestamp(a) == _without_timestamp(b)

    def test_digest_is_first_key_after_timestamp_and_self_verifying(self, tmp_path):
        stamped = write_report(tmp_path / "r.json", {"x": 1})
        on_disk = json.loads((tmp_path / "r.json").read_text())
        assert list(on_disk)[:2] == ["timestamp", "report_digest"]
        assert on_disk == stamped
        # recompute the digest over everything but the stamp and digest itself
        body = {k: v for k, v in on_disk.items() if k not in ("timestamp", "report_digest")}
        assert config_digest(body) == on_disk["report_digest"]

    def test_numpy_and_nonfinite_values_serialize(self, tmp_path):
        content = {
            "f": np.float64(0.25),
            "i": np.int64(7),
            "flag": np.bool_(True),
            "arr": np.array([1.0, np.nan]),
            "bad": float("inf"),
            "worse": float("-inf"),
        }
        stamped = write_report(tmp_path / "r.json", content)
        assert stamped["f"] == 0.25 and isinstance(stamped["f"], float)
        assert stamped["i"] == 7 and isinstance(stamped["i"], int)
        assert stamped["flag"] is True
        assert stamped["arr"] == [1.0, "nan"]
        assert stamped["bad"] == "inf"
        assert stamped["worse"] == "-inf"
        json.loads((tmp_path / "r.json").read_text())  # strict JSON, no NaN literals

    def test_dataclass_payload(self, tmp_path):
        @dataclasses.dataclass
        class Row:
            t: float
            tv: float

        stamped = write_report(tmp_path / "r.json", {"rows": [Row(0.5, 0.1)]})
        assert stamped["rows"] == [{"t": 0.5, "tv": 0.1}]

    def test_creates_parent_dirs(self, tmp_path):
        write_report(tmp_path / "deep" / "er" / "r.json", {"x": 1})
        assert (tmp_path / "deep" / "er" / "r.json").exists()


class TestDigest:
    def test_key_order_irrelevant(self):
        assert config_digest({"a": 1, "b": [2, 3]}) == config_digest({"b": [2, 3], "a": 1})

    def test_value_changes_digest(self):
        assert config_digest({"a": 1}) != config_digest({"a": 2})

    def test_canonical_json_is_compact_and_sorted(self):
        assert canonical_json({"b": 1, "a": np.float64(2)}) == '{"a":2.0,"b":1}'


class TestWriteSeries:
    def test_layout(self, tmp_path):
        write_series(tmp_path / "s.csv", [(0.25, 0.1, 0.01), (0.5, 0.05, None)])
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "t,value,stderr"
        assert lines[1] == "0.25,0.1,0.01"
        assert lines[2] == "0.5,0.05,"

    def test_custom_header(self, tmp_path):
        write_series(tmp_path / "s.csv", [(1.0, 2.0)], header=("x", "density"))
        assert (tmp_path / "s.csv").read_text().startswith("x,density\n")

    def test_roundtrip_precision(self, tmp_path):
        v = 0.1234567890123456789
        write_series(tmp_path / "s.csv", [(0.0, v, 0.0)])
        back = float((tmp_path / "s.csv").read_text().splitlines()[1].split(",")[1])
        assert back == v


class TestToleranceProfile:
    def test_default(self):
        prof = ToleranceProfile.named("default")
        assert prof.lambda0_halfwidth == 1e-3
        assert prof.doob_rowsum == 1e-12
        assert prof.chi2_alpha == 0.01

    def test_strict_tightens_numerics(self):
        d, s = ToleranceProfile.named("default"), ToleranceProfile.named("strict")
        assert s.invariance < d.invariance
        assert s.intertwining < d.intertwining
        assert s.qsd_l1 < d.qsd_l1

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            ToleranceProfile.named("lenient")
