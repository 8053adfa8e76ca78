import json
from pathlib import Path

import numpy as np
import pytest

from fellbundles.cli import main, run

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fx(name: str) -> str:
    return str(FIXTURES / name)


def test_validate_delta_groupoid_passes(capsys):
    assert main(["validate", fx("delta.json")]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out


def test_validate_broken_groupoid_reports_witness():
    code, report = run(["validate", fx("broken_groupoid.json")])
    assert code == 1
    witness = report["checks"][0]["witness"]
    assert witness["error"] == "NonAssociative"
    assert len(witness["triple"]) == 3


def test_validate_bundle_fixture():
    code, report = run(["validate", fx("compacts_12.json"), "--samples", "20"])
    assert code == 0
    assert report["passed"]


def test_validate_missing_file_is_usage_error():
    assert main(["validate", "no_such_file.json"]) == 2


def test_unknown_subcommand_exits_2():
    assert main(["frobnicate"]) == 2


def test_norm_of_shipped_section_is_two(capsys):
    code, report = run(["norm", fx("z2_section_ones.json")])
    assert code == 0
    norms = report["checks"][0]["witness"]
    assert norms["operator"] == pytest.approx(2.0, rel=1e-9)
    assert norms["l2"] == pytest.approx(np.sqrt(2.0), rel=1e-9)
    assert norms["sup"] == pytest.approx(1.0, rel=1e-9)


def test_algebra_report_dims_and_center():
    code, report = run(["algebra", fx("delta_scalar_bundle.json")])
    assert code == 0
    info = report["checks"][0]["witness"]
    assert info["dim"] == 4
    assert info["center_dim"] == 1


def test_check_expectation_cli():
    code, report = run(["check-expectation", fx("z2_line.json"),
                        "--samples", "20", "--seed", "7"])
    assert code == 0
    assert report["passed"]


def test_construct_compacts_roundtrip(tmp_path):
    out = tmp_path / "bundle.json"
    code, report = run(["construct", "compacts", "--dims", "1,2",
                        "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["unit_dims"] == {"0": 1, "3": 2}
    code2, report2 = run(["validate", str(out), "--samples", "10"])
    assert code2 == 0


def test_construct_cocycle_from_fixture(tmp_path):
    out = tmp_path / "twisted.json"
    code, report = run(["construct", "cocycle", "--input", fx("z2z2_cocycle.json"),
                        "--out", str(out)])
    assert code == 0
    code2, report2 = run(["algebra", str(out)])
    assert code2 == 0
    info = report2["checks"][0]["witness"]
    assert info["dim"] == 4 and info["center_dim"] == 1


def test_construct_semidirect_from_fixture(tmp_path):
    out = tmp_path / "crossed.json"
    code, _ = run(["construct", "semidirect", "--input", fx("swap_action.json"),
                   "--out", str(out)])
    assert code == 0
    code2, report2 = run(["algebra", str(out)])
    info = report2["checks"][0]["witness"]
    assert info["dim"] == 4 and info["center_dim"] == 1


def test_construct_bimodule_inline(tmp_path):
    src = tmp_path / "bimodule.json"
    src.write_text(json.dumps({
        "A": {"dim": 1, "basis": [[[[1.0, 0.0]]]]},
        "B": {"dim": 1, "basis": [[[[1.0, 0.0]]]]},
        "C": {"basis": [[[[1.0, 0.0]]]]},
    }))
    out = tmp_path / "delta_bundle.json"
    code, _ = run(["construct", "bimodule", "--input", str(src), "--out", str(out)])
    assert code == 0
    code2, report2 = run(["algebra", str(out)])
    assert report2["checks"][0]["witness"]["dim"] == 4


def test_construct_pullback(tmp_path):
    # pull the delta-scalar bundle back along the pair(2) -> delta isomorphism
    out = tmp_path / "pulled.json"
    code, _ = run(["construct", "pullback",
                   "--bundle", fx("delta_scalar_bundle.json"),
                   "--morphism", fx("pair2_to_delta_morphism.json"),
                   "--out", str(out)])
    assert code == 0
    code2, report2 = run(["validate", str(out), "--samples", "10"])
    assert code2 == 0


def test_morita_theorem42_cli(tmp_path):
    cert_path = tmp_path / "cert.json"
    code, report = run(["morita", "theorem42", fx("compacts_12.json"),
                        fx("pair2_to_delta_morphism.json"),
                        "--out", str(cert_path), "--samples", "20"])
    assert code == 0
    dims = None
    for c in report["checks"]:
        if c["name"] == "corners_full":
            dims = sorted(c["witness"]["corner_dims"])
    assert dims == [1, 4]
    # the written certificate re-verifies standalone
    code2, report2 = run(["morita", "check", str(cert_path)])
    assert code2 == 0
    assert report2["passed"]


def test_morita_stabilize_cli(tmp_path):
    cert_path = tmp_path / "stab.json"
    code, report = run(["morita", "stabilize", fx("z2_line.json"),
                        "--out", str(cert_path), "--samples", "20"])
    assert code == 0
    code2, report2 = run(["morita", "check", str(cert_path)])
    assert code2 == 0


def test_morita_check_rejects_tampered_certificate(tmp_path):
    cert_path = tmp_path / "cert.json"
    run(["morita", "theorem42", fx("compacts_12.json"),
         fx("pair2_to_delta_morphism.json"), "--out", str(cert_path)])
    data = json.loads(cert_path.read_text())
    # drop most witnesses for corner 0: the span check must fail
    data["witnesses"][0] = data["witnesses"][0][:1]
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(data))
    code, report = run(["morita", "check", str(tampered)])
    assert code == 1


def test_selftest_seed_changes_samples_not_verdict():
    code1, rep1 = run(["selftest", "--samples", "10", "--seed", "1"])
    code2, rep2 = run(["selftest", "--samples", "10", "--seed", "2"])
    assert code1 == code2 == 0
    verdicts1 = [(c["name"], c["passed"]) for c in rep1["checks"]]
    verdicts2 = [(c["name"], c["passed"]) for c in rep2["checks"]]
    assert verdicts1 == verdicts2
    # residuals of randomized checks differ between seeds
    r1 = {c["name"]: c["residual"] for c in rep1["checks"] if c["residual"]}
    r2 = {c["name"]: c["residual"] for c in rep2["checks"] if c["residual"]}
    assert any(abs(r1[k] - r2[k]) > 0 for k in r1 if k in r2 and r1[k] is not None)


def test_selftest_absurd_tolerance_reports_tolerance_induced():
    code, report = run(["selftest", "--samples", "10", "--tol", "1e-15",
                        "--norm-tol", "1e-15"])
    assert code == 1
    statuses = {c["status"] for c in report["checks"] if not c["passed"]}
    assert "tolerance-induced" in statuses
    assert "fail" not in statuses  # nothing truly broken, only the floor


def test_fixture_files_match_generators():
    # the committed fixtures agree byte-for-byte with fresh constructions
    from fellbundles.bundle import compacts_bundle, from_bimodule, trivial_line_bundle
    from fellbundles.bimodule import scalars
    from fellbundles.groupoid import cyclic_group_table, delta, from_group
    from fellbundles.serialize import bundle_to_dict, canonical_dumps, groupoid_to_dict

    assert (FIXTURES / "delta.json").read_text() == \
        canonical_dumps(groupoid_to_dict(delta()))
    assert (FIXTURES / "compacts_12.json").read_text() == \
        canonical_dumps(bundle_to_dict(compacts_bundle([1, 2])))
    z2 = from_group(cyclic_group_table(2))
    assert (FIXTURES / "z2_line.json").read_text() == \
        canonical_dumps(bundle_to_dict(trivial_line_bundle(z2)))
    assert (FIXTURES / "delta_scalar_bundle.json").read_text() == \
        canonical_dumps(bundle_to_dict(from_bimodule(scalars(), scalars(),
                                                     [np.eye(1)])))
