import os

import numpy as np
import pytest

from sle.cli import main

TINY = """
run_id = tiny
out_dir = {out}
data.n_classes = 3
data.d_data = 8
data.n_per_class = 40
data.seed = 5
tokenizer.d_latent = 8
tokenizer.seed = 2
model.hidden = 16
model.blocks = 1
train.epochs = 3
train.batch_size = 30
train.seed = 9
train.checkpoint_every = 2
sample.steps = 2
sample.omega = 1.0
eval.n_samples = 30
"""


@pytest.fixture
def trained(tmp_path):
    out = tmp_path / "run"
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY.format(out=out))
    assert main(["train", str(cfg)]) == 0
    return out, cfg


def test_train_writes_expected_files(trained):
    out, _ = trained
    assert (out / "final.ckpt").exists()
    assert (out / "train.csv").exists()
    assert (out / "latents.ckpt").exists()
    assert (out / "epoch_00002.ckpt").exists()
    header = (out / "train.csv").read_text().splitlines()[0]
    assert header == "epoch,recon_l1,recon_cos,cons_l1,cons_cos,latent_cons,total"


def test_train_rerun_is_bit_identical(trained, tmp_path):
    out, cfg = trained
    first = (out / "final.ckpt").read_bytes()
    assert main(["train", str(cfg)]) == 0
    assert (out / "final.ckpt").read_bytes() == first


def test_train_resume_matches_uninterrupted(trained, tmp_path):
    out, cfg = trained
    full = (out / "final.ckpt").read_bytes()
    resume_cfg = tmp_path / "tiny2.cfg"
    resume_cfg.write_text(cfg.read_text())
    assert main(["train", str(resume_cfg), "--resume", str(out / "epoch_00002.ckpt")]) == 0
    assert (out / "final.ckpt").read_bytes() == full


def test_missing_required_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("out_dir = /tmp/x\n")
    assert main(["train", str(cfg)]) == 2
    assert "run_id" in capsys.readouterr().err


def test_sample_writes_provenance_and_rows(trained, tmp_path):
    out, _ = trained
    dest = tmp_path / "s.csv"
    rc = main(["sample", str(out / "final.ckpt"), "--label", "1", "--n", "4",
               "--seed", "3", "--out", str(dest)])
    assert rc == 0
    lines = dest.read_text().splitlines()
    assert any(line.startswith("# steps = ") for line in lines)
    assert any(line.startswith("# omega = ") for line in lines)
    data_rows = [line for line in lines if not line.startswith("#")]
    assert data_rows[0].startswith("label,x0,")
    assert len(data_rows) == 5


def test_sample_n_zero_header_only(trained, tmp_path):
    out, _ = trained
    dest = tmp_path / "empty.csv"
    assert main(["sample", str(out / "final.ckpt"), "--label", "0", "--n", "0",
                 "--out", str(dest)]) == 0
    rows = [line for line in dest.read_text().splitlines() if not line.startswith("#")]
    assert len(rows) == 1


def test_sample_same_flags_identical_files(trained, tmp_path):
    out, _ = trained
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for dest in (a, b):
        assert main(["sample", str(out / "final.ckpt"), "--label", "2", "--n", "3",
                     "--seed", "11", "--out", str(dest)]) == 0
    assert a.read_text() == b.read_text()


def test_sample_label_out_of_range_fails(trained, tmp_path):
    out, _ = trained
    rc = main(["sample", str(out / "final.ckpt"), "--label", "9",
               "--out", str(tmp_path / "x.csv")])
    assert rc == 1


def test_eval_appends_rows(trained):
    out, _ = trained
    ckpt = str(out / "final.ckpt")
    assert main(["eval", ckpt, "--steps", "2", "--n", "30"]) == 0
    assert main(["eval", ckpt, "--steps", "4", "--n", "30"]) == 0
    lines = (out / "eval.csv").read_text().splitlines()
    assert lines[0] == "run_id,steps,omega,gamma,toy_fid,mmd2,class_acc"
    assert len(lines) == 3
    assert lines[1].startswith("tiny,2,")
    assert lines[2].startswith("tiny,4,")


def test_eval_self_reference_mode(trained):
    out, _ = trained
    ckpt = str(out / "final.ckpt")
    assert main(["eval", ckpt, "--self-reference", "--n", "30"]) == 0
    row = (out / "eval.csv").read_text().splitlines()[-1].split(",")
    assert float(row[4]) < 1e-6


def test_eval_indivisible_n_fails(trained):
    out, _ = trained
    assert main(["eval", str(out / "final.ckpt"), "--n", "31"]) == 1


def test_cost_paper_mode_passes(capsys):
    assert main(["cost", "--mode", "paper", "--steps", "4", "--cfg"]) == 0
    out = capsys.readouterr().out
    assert "pixel_loop,4,1,13324.0,13326.0,PASS" in out
    assert "latent_small,2,0,302.0,302.0,PASS" in out
    assert "pixel_loop_small,6,0,7143.0,7144.0,PASS" in out
    assert "FAIL" not in out


def test_cost_paper_mode_t6_row(capsys):
    assert main(["cost", "--mode", "paper", "--steps", "6", "--cfg"]) == 0
    out = capsys.readouterr().out
    assert "latent,6,1,2973.0,2969.0,PASS" in out


def test_cost_toy_mode(trained, capsys):
    out_dir, _ = trained
    assert main(["cost", "--mode", "toy", "--steps", "1",
                 "--ckpt", str(out_dir / "final.ckpt")]) == 0
    out = capsys.readouterr().out
    assert "toy_latent,1,0," in out


def test_cost_toy_mode_without_ckpt_exits_2():
    assert main(["cost", "--mode", "toy"]) == 2


def test_checkpoint_with_unknown_arrays_rejected(trained, tmp_path):
    out, _ = trained
    from sle import checkpoint

    arrays, cfg, rng = checkpoint.load(str(out / "final.ckpt"))
    arrays["mystery"] = np.zeros(3, dtype=np.float32)
    bad = tmp_path / "bad.ckpt"
    checkpoint.save(str(bad), arrays, config=cfg, rng_state=rng)
    assert main(["eval", str(bad), "--n", "30"]) == 1


def test_commands_do_not_mutate_inputs(trained, tmp_path):
    out, _ = trained
    ckpt = out / "final.ckpt"
    before = ckpt.read_bytes()
    main(["sample", str(ckpt), "--label", "0", "--n", "2",
          "--out", str(tmp_path / "s.csv")])
    main(["eval", str(ckpt), "--n", "30"])
    main(["cost", "--mode", "toy", "--steps", "2", "--ckpt", str(ckpt)])
    assert ckpt.read_bytes() == before
