from shadowlab.cli import (
    EXIT_CONFIG_ERROR,
    EXIT_PASS,
    EXIT_UNSUPPORTED,
    main,
)

CAT_SHADOW = """
[map]
family = torus
matrix = 2 1; 1 1

[perturbation]
kind = gaussian
sigma = 1e-3
anchor = 0.2 0.4

[run]
radius = 128
seed = 1
seeds = 2
ladder = 8 16 32
"""

DOUBLING_RARE = """
[map]
family = interval
a = 1
b = 1
c = 0.5
alpha = 0
beta = 0

[perturbation]
kind = rare
density = 0.05
amplitude = 0.02
anchor = 0.37

[run]
radius = 64
seed = 3
"""


def write_config(tmp_path, text, name="config.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_rows(path):
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "# schema=1"
    header = lines[1].split(",")
    return header, [dict(zip(header, ln.split(","))) for ln in lines[2:]]


# ---------------------------------------------------------------------------
# classify


def test_classify_zero_noise_all_flags(tmp_path):
    cfg = write_config(tmp_path, DOUBLING_RARE.replace("density = 0.05",
                                                       "density = 0.0"))
    code = main(["classify", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == EXIT_PASS
    header, rows = read_rows(tmp_path / "classify.csv")
    assert header[:4] == ["seed", "max_gap", "avg_gap", "density"]
    # zero noise still needs a positive accuracy; density-zero rare model
    # reproduces a true orbit where every class holds
    assert rows == [] or all(r["uniform"] == "1" for r in rows)


def test_classify_rare_flags(tmp_path):
    cfg = write_config(tmp_path, DOUBLING_RARE.replace("amplitude = 0.02",
                                                       "amplitude = 1.0"))
    code = main(["classify", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == EXIT_PASS
    _, rows = read_rows(tmp_path / "classify.csv")
    assert rows[0]["rare"] == "1"
    assert rows[0]["uniform"] == "0"  # jumps of size 1 exceed eps = density


def test_classify_gaussian_runs(tmp_path):
    cfg = write_config(tmp_path, CAT_SHADOW)
    code = main(["classify", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == EXIT_PASS
    _, rows = read_rows(tmp_path / "classify.csv")
    assert len(rows) == 2


# ---------------------------------------------------------------------------
# shadow


def test_shadow_cat_map_passes_and_writes_files(tmp_path):
    cfg = write_config(tmp_path, CAT_SHADOW)
    code = main(["shadow", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == EXIT_PASS
    header, rows = read_rows(tmp_path / "summary.csv")
    assert len(rows) == 2
    for row in rows:
        assert row["avg_ok"] == "1"
        assert row["recursion_ok"] == "1"
        assert row["gap_sums_ok"] == "1"
        assert float(row["avg_error"]) <= float(row["bound"])
    t_header, t_rows = read_rows(tmp_path / "trajectory_1.csv")
    assert t_header == ["t", "y0", "y1", "z0", "z1", "error"]
    assert len(t_rows) == 257
    r_header, r_rows = read_rows(tmp_path / "rounds_1.csv")
    assert "R_8" in r_header and "pass_32" in r_header
    assert all(r["pass_8"] == "1" for r in r_rows)


def test_shadow_doubling_rare_passes(tmp_path):
    cfg = write_config(tmp_path, DOUBLING_RARE)
    code = main(["shadow", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == EXIT_PASS


def test_shadow_hyperbolic_affine_family(tmp_path):
    cfg = write_config(tmp_path, """
[map]
family = affine
matrix = 2 1; 1 1
offset = 0.1 -0.2

[perturbation]
kind = gaussian
sigma = 1e-4
anchor = 0.35 0.1

[run]
radius = 10
seed = 2
ladder = 2 4 8
""")
    assert main(["shadow", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PASS
    _, rows = read_rows(tmp_path / "summary.csv")
    assert rows[0]["avg_ok"] == "1" and rows[0]["gap_sums_ok"] == "1"


def test_shadow_one_sided_window(tmp_path):
    cfg = write_config(tmp_path, DOUBLING_RARE.replace("radius = 64",
                                                       "radius = 64\none_sided = true"))
    assert main(["shadow", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PASS
    _, rows = read_rows(tmp_path / "trajectory_3.csv")
    assert rows[0]["t"] == "0"
    assert len(rows) == 129


def test_shadow_rotation_map_unsupported_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[map]
family = affine
matrix = 0 -1; 1 0

[perturbation]
kind = gaussian
sigma = 1e-3
anchor = 0.1 0.1

[run]
radius = 16
""")
    code = main(["shadow", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == EXIT_UNSUPPORTED
    assert "neutral" in capsys.readouterr().err


def test_shadow_reproducible_bytes(tmp_path):
    cfg = write_config(tmp_path, DOUBLING_RARE)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["shadow", "--config", str(cfg), "--out", str(out1)]) == EXIT_PASS
    assert main(["shadow", "--config", str(cfg), "--out", str(out2)]) == EXIT_PASS
    for name in ("summary.csv", "trajectory_3.csv", "rounds_3.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_shadow_seed_override(tmp_path):
    cfg = write_config(tmp_path, DOUBLING_RARE)
    assert main(["shadow", "--config", str(cfg), "--out", str(tmp_path),
                 "--seed", "9"]) == EXIT_PASS
    assert (tmp_path / "trajectory_9.csv").exists()


def test_shadow_no_bound_checks_flag(tmp_path):
    cfg = write_config(tmp_path, DOUBLING_RARE)
    assert main(["shadow", "--config", str(cfg), "--out", str(tmp_path),
                 "--no-bound-checks"]) == EXIT_PASS
    _, rows = read_rows(tmp_path / "summary.csv")
    # verdict columns still report; the exit code just ignores them
    assert rows[0]["recursion_ok"] == "1"


def test_radius_override(tmp_path):
    cfg = write_config(tmp_path, DOUBLING_RARE)
    assert main(["shadow", "--config", str(cfg), "--out", str(tmp_path),
                 "--radius", "32"]) == EXIT_PASS
    _, rows = read_rows(tmp_path / "trajectory_3.csv")
    assert len(rows) == 65


# ---------------------------------------------------------------------------
# config validation


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, CAT_SHADOW.replace("seeds = 2",
                                                    "seeds = 2\nbogus = 1"))
    code = main(["shadow", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG_ERROR
    assert "bogus" in capsys.readouterr().err


def test_missing_required_key(tmp_path, capsys):
    cfg = write_config(tmp_path, "[map]\nfamily = torus\n")
    code = main(["shadow", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG_ERROR
    assert "matrix" in capsys.readouterr().err


def test_bad_map_family(tmp_path):
    cfg = write_config(tmp_path, CAT_SHADOW.replace("family = torus",
                                                    "family = circle"))
    assert main(["shadow", "--config", str(cfg),
                 "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR


# ---------------------------------------------------------------------------
# sweep


def test_sweep_one_point_matches_shadow_summary(tmp_path):
    cfg_text = DOUBLING_RARE + """
[sweep]
parameter = perturbation.density
values = 0.05
"""
    cfg = write_config(tmp_path, cfg_text)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PASS
    assert main(["shadow", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PASS
    _, sweep_rows = read_rows(tmp_path / "sweep.csv")
    _, shadow_rows = read_rows(tmp_path / "summary.csv")
    assert sweep_rows[0]["avg_error"] == shadow_rows[0]["avg_error"]
    assert sweep_rows[0]["bound"] == shadow_rows[0]["bound"]


def test_sweep_rows_in_grid_order_even_with_workers(tmp_path):
    cfg_text = DOUBLING_RARE + """
[sweep]
parameter = perturbation.amplitude
values = 0.001 0.004 0.016
workers = 3
"""
    cfg = write_config(tmp_path, cfg_text)
    out_par = tmp_path / "par"
    assert main(["sweep", "--config", str(cfg), "--out", str(out_par)]) == EXIT_PASS
    _, rows = read_rows(out_par / "sweep.csv")
    assert [float(r["value"]) for r in rows] == [0.001, 0.004, 0.016]
    # error scales with the perturbation scale
    errs = [float(r["avg_error"]) for r in rows]
    assert errs[0] < errs[-1]
    # execution order must not leak into the bytes
    cfg_seq = write_config(tmp_path, cfg_text.replace("workers = 3", "workers = 1"),
                           name="seq.ini")
    out_seq = tmp_path / "seq"
    assert main(["sweep", "--config", str(cfg_seq), "--out", str(out_seq)]) == EXIT_PASS
    assert (out_par / "sweep.csv").read_bytes() == (out_seq / "sweep.csv").read_bytes()


def test_sweep_rejects_unknown_parameter(tmp_path):
    cfg = write_config(tmp_path, DOUBLING_RARE + "\n[sweep]\nparameter = run.seed\nvalues = 1\n")
    assert main(["sweep", "--config", str(cfg),
                 "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR


# ---------------------------------------------------------------------------
# primitive


def test_primitive_golden_mean(tmp_path, capsys):
    matrix = tmp_path / "m.txt"
    matrix.write_text("2\n1 1\n1 0\n")
    assert main(["primitive", str(matrix)]) == EXIT_PASS
    assert capsys.readouterr().out.strip() == "M=2"


def test_primitive_period_two_none(tmp_path, capsys):
    matrix = tmp_path / "m.txt"
    matrix.write_text("2\n0 1\n1 0\n")
    assert main(["primitive", str(matrix)]) == EXIT_PASS
    assert capsys.readouterr().out.strip() == "none"


def test_primitive_malformed_exit_2(tmp_path, capsys):
    matrix = tmp_path / "m.txt"
    matrix.write_text("2\n1 1\n")
    assert main(["primitive", str(matrix)]) == EXIT_CONFIG_ERROR


# ---------------------------------------------------------------------------
# decay-fit


def test_decay_fit_alpha_one(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[decay]
coefficient = 1.0
alpha = 1.0
v0 = 1.0
steps = 10000
""")
    assert main(["decay-fit", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PASS
    out = capsys.readouterr().out
    gamma = float(out.split("gamma_hat=")[1].split()[0])
    assert abs(gamma - 1.0) <= 0.05
    _, rows = read_rows(tmp_path / "decay_fit.csv")
    assert float(rows[0]["reference"]) == 1.0
    header, decay_rows = read_rows(tmp_path / "decay.csv")
    assert header == ["n", "value"]
    assert len(decay_rows) == 10001


# ---------------------------------------------------------------------------
# glue


def test_glue_certificate_dump(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[map]
family = torus
matrix = 2 1; 1 1

[glue]
x0 = 0.0 0.0
y0 = 0.3 0.7
radius = 24
""")
    assert main(["glue", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PASS
    header, rows = read_rows(tmp_path / "certificate.csv")
    assert header == ["k", "error", "bound"]
    assert len(rows) == 49
    for r in rows:
        if int(r["k"]) != 0:
            assert float(r["error"]) <= float(r["bound"]) + 1e-12
    assert "satisfied=1" in capsys.readouterr().out
