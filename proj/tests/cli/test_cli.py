"""End-to-end checks of the affdepth command-line tool.

Usage: test_cli.py <path to affdepth executable>
"""

import json
import struct
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

EXE = None


def write_pfm(path, width, height, values):
    """Grayscale little-endian PFM, rows bottom to top; values are row-major top to bottom."""
    rows = [values[y * width:(y + 1) * width] for y in range(height)]
    payload = b"".join(struct.pack("<%df" % width, *row) for row in reversed(rows))
    Path(path).write_bytes(b"Pf\n%d %d\n-1.0\n" % (width, height) + payload)


def read_pfm(path):
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    width, height = map(int, parts[1].split())
    scale = float(parts[2])
    fmt = ("<" if scale < 0 else ">") + "%df" % (width * height)
    flat = struct.unpack(fmt, parts[3][:4 * width * height])
    rows = [flat[y * width:(y + 1) * width] for y in range(height)]
    return width, height, [v for row in reversed(rows) for v in row]


def run(*args):
    return subprocess.run([EXE, *map(str, args)], capture_output=True, text=True, timeout=600)


def tiny_config(path, loss="combined", iterations=6):
    part = {"width": 16, "height": 16, "planes": 2, "spheres": 1, "boxes": 0, "noise_sigma": 0.2,
            "affine_range": {"a": [0.5, 2.0], "b": [0.0, 1.0]}}
    cfg = {"parts": [dict(part, seed=1), dict(part, seed=2, planes=1)],
           "n_per_part": 4, "n_val_per_part": 1, "teacher_iterations": 4, "p": [0.5, 0.5], "step_len": 3,
           "train": {"batch_size": 2, "iterations": iterations, "loss": loss, "val_every": 3, "seed": 0}}
    Path(path).write_text(json.dumps(cfg))


class Cli(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_usage_exit_codes(self):
        self.assertEqual(run("--help").returncode, 0)
        self.assertEqual(run("metrics", "--help").returncode, 0)
        self.assertEqual(run("--bogus").returncode, 1)
        self.assertEqual(run("metrics", "--pred", self.dir / "p.pfm", "--out", self.dir / "m.json").returncode, 1)
        write_pfm(self.dir / "g.pfm", 2, 1, [1, 2])
        missing = run("metrics", "--pred", self.dir / "nope.pfm", "--gt", self.dir / "g.pfm",
                      "--out", self.dir / "m.json")
        self.assertEqual(missing.returncode, 1)

    def test_metrics_recovers_alignment(self):
        gt = [1.0, 2.0, 4.0, 8.0, 3.0, 5.0]
        write_pfm(self.dir / "gt.pfm", 3, 2, gt)
        write_pfm(self.dir / "pred.pfm", 3, 2, [3 * g + 2 for g in gt])
        out = self.dir / "m.json"
        res = run("metrics", "--pred", self.dir / "pred.pfm", "--gt", self.dir / "gt.pfm", "--out", out)
        self.assertEqual(res.returncode, 0, res.stderr)
        report = json.loads(out.read_text())
        self.assertAlmostEqual(report["alignment"]["scale"], 1 / 3, places=6)
        self.assertAlmostEqual(report["alignment"]["shift"], -2 / 3, places=6)
        self.assertLess(report["abs_rel"], 1e-6)
        self.assertEqual(report["n_valid"], 6)
        self.assertIsNone(report["whdr"])

        (self.dir / "pairs.csv").write_text("i_x,i_y,j_x,j_y,label,weight\n0,0,1,0,-1,1\n2,0,0,0,-1,1\n")
        res = run("metrics", "--pred", self.dir / "pred.pfm", "--gt", self.dir / "gt.pfm",
                  "--pairs", self.dir / "pairs.csv", "--out", out)
        self.assertEqual(res.returncode, 0, res.stderr)
        self.assertEqual(json.loads(out.read_text())["whdr"], 0.5)

    def test_metrics_shape_mismatch_is_data_error(self):
        write_pfm(self.dir / "a.pfm", 2, 1, [1, 2])
        write_pfm(self.dir / "b.pfm", 1, 2, [1, 2])
        res = run("metrics", "--pred", self.dir / "a.pfm", "--gt", self.dir / "b.pfm", "--out", self.dir / "m.json")
        self.assertEqual(res.returncode, 2)

    def test_plan_orders_by_score(self):
        (self.dir / "s.csv").write_text("sample_id,part_id,score\n0,0,0.3\n1,0,0.1\n2,0,0.2\n")
        out = self.dir / "plan.json"
        res = run("plan", "--scores", self.dir / "s.csv", "--p", "0.5", "--batch-size", "1", "--out", out)
        self.assertEqual(res.returncode, 0, res.stderr)
        self.assertEqual(json.loads(out.read_text())["orders"]["0"], [1, 2, 0])
        res = run("plan", "--scores", self.dir / "s.csv", "--p", "0.5", "--batch-size", "1", "--mode", "mcl-r",
                  "--out", out)
        self.assertEqual(json.loads(out.read_text())["orders"]["0"], [0, 2, 1])
        bad = run("plan", "--scores", self.dir / "s.csv", "--p", "0.5", "--mode", "sideways", "--out", out)
        self.assertEqual(bad.returncode, 1)

    def write_flow(self, prefix, w, h, dx, dy):
        write_pfm(f"{prefix}.dx.pfm", w, h, dx)
        write_pfm(f"{prefix}.dy.pfm", w, h, dy)

    def test_ingest_accepts_and_rejects(self):
        w, h = 10, 10
        n = w * h
        self.write_flow(self.dir / "lr", w, h, [0.4] * n, [0.0] * n)
        self.write_flow(self.dir / "rl", w, h, [-0.4] * n, [0.0] * n)
        args = ["ingest", "--flow-lr-prefix", self.dir / "lr", "--flow-rl-prefix", self.dir / "rl",
                "--out-depth", self.dir / "d.pfm", "--out-report", self.dir / "r.json"]
        res = run(*args)
        self.assertEqual(res.returncode, 0, res.stderr)
        report = json.loads((self.dir / "r.json").read_text())
        self.assertTrue(report["accepted"])
        self.assertEqual(report["n_valid"], n)
        _, _, depth = read_pfm(self.dir / "d.pfm")
        self.assertTrue(all(abs(d - 1.0) < 1e-6 for d in depth))

        # 71 vertical outliers leave 29% valid.
        self.write_flow(self.dir / "lr", w, h, [0.4] * n, [9.0] * 71 + [0.0] * 29)
        res = run(*args)
        self.assertEqual(res.returncode, 2)
        report = json.loads((self.dir / "r.json").read_text())
        self.assertFalse(report["accepted"])
        self.assertEqual(report["n_removed_vertical"], 71)

    def test_pointcloud(self):
        write_pfm(self.dir / "d.pfm", 2, 2, [1.0, 2.0, float("nan"), 4.0])
        out = self.dir / "c.ply"
        res = run("pointcloud", "--depth", self.dir / "d.pfm", "--fx", 1, "--fy", 1, "--cx", 0, "--cy", 0,
                  "--out", out)
        self.assertEqual(res.returncode, 0, res.stderr)
        lines = out.read_text().splitlines()
        self.assertIn("element vertex 3", lines)
        body = [list(map(float, l.split())) for l in lines[lines.index("end_header") + 1:]]
        self.assertEqual(body, [[0, 0, 1], [2, 0, 2], [4, 4, 4]])
        bad = run("pointcloud", "--depth", self.dir / "d.pfm", "--fx", 0, "--fy", 1, "--cx", 0, "--cy", 0,
                  "--out", out)
        self.assertEqual(bad.returncode, 1)

    def test_gradcheck_is_deterministic(self):
        a = run("gradcheck", "--loss", "ssi", "--trials", 5, "--seed", 3)
        b = run("gradcheck", "--loss", "ssi", "--trials", 5, "--seed", 3)
        self.assertEqual(a.returncode, 0, a.stderr)
        self.assertEqual(a.stdout, b.stdout)
        self.assertTrue(a.stdout.splitlines()[-1].startswith("PASS"))
        self.assertEqual(run("gradcheck", "--loss", "nope").returncode, 1)

    def test_losses(self):
        write_pfm(self.dir / "p.pfm", 3, 1, [1, 2, 4])
        write_pfm(self.dir / "g.pfm", 3, 1, [1, 2, 3])
        res = run("losses", "--pred", self.dir / "p.pfm", "--gt", self.dir / "g.pfm", "--loss", "ssi")
        self.assertEqual(res.returncode, 0, res.stderr)
        self.assertAlmostEqual(json.loads(res.stdout)["value"], 1 / 84, places=9)

    def test_synth_and_train_are_deterministic(self):
        cfg = self.dir / "cfg.json"
        tiny_config(cfg)
        res = run("synth", "--config", cfg, "--out-dir", self.dir / "data")
        self.assertEqual(res.returncode, 0, res.stderr)
        manifest = json.loads((self.dir / "data" / "manifest.json").read_text())
        self.assertEqual(len(manifest["samples"]), 10)
        first = manifest["samples"][0]["dir"]
        self.assertTrue((self.dir / "data" / first / "gt_stored.pfm").exists())

        for name in ("a", "b"):
            res = run("train", "--config", cfg, "--curriculum", "mcl", "--out", self.dir / name)
            self.assertEqual(res.returncode, 0, res.stderr)
        for f in ("checkpoint.json", "history.csv"):
            self.assertEqual((self.dir / "a" / f).read_bytes(), (self.dir / "b" / f).read_bytes())
        history = (self.dir / "a" / "history.csv").read_text().splitlines()
        self.assertEqual(history[0], "iter,lr,train_loss,val_abs_rel")
        self.assertEqual(len(history), 7)

        scores = self.dir / "scores.csv"
        self.assertEqual(run("teachers", "--config", cfg, "--out", scores).returncode, 0)
        self.assertEqual(len(scores.read_text().splitlines()), 9)
        self.assertEqual(run("train", "--config", cfg, "--curriculum", "zigzag", "--out", self.dir / "c").returncode, 1)


if __name__ == "__main__":
    EXE = sys.argv.pop(1)
    unittest.main()
