#!/usr/bin/env python3
# Copyright 2026 The EquiSwarm Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""End-to-end checks of the equiswarm command-line tool.

Usage: cli_test.py <equiswarm binary> <source dir>
"""

import json
import pathlib
import subprocess
import sys
import tempfile
import unittest

import jsonschema
from referencing import Registry, Resource

BINARY = ""
SOURCE = pathlib.Path(".")


def schemas():
    docs = SOURCE / "docs" / "schemas"
    loaded = {p.name: json.loads(p.read_text()) for p in docs.glob("*.schema.json")}
    registry = Registry().with_resources(
        (name, Resource.from_contents(body)) for name, body in loaded.items())
    return loaded, registry


def validate(instance, name):
    loaded, registry = schemas()
    jsonschema.Draft202012Validator(loaded[name], registry=registry).validate(instance)


def run(*args, cwd=None):
    return subprocess.run([BINARY, *args], capture_output=True, text=True, cwd=cwd, timeout=600)


def config(name):
    return str(SOURCE / "configs" / name)


class TrainAndEval(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.out = pathlib.Path(cls.tmp.name) / "run"
        cls.train = run("train", "--config", config("toy.ini"), "--override", "total_steps=1000",
                        "--override", "lr=0.0001", "--out", str(cls.out))

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_train_completes_with_checkpoints(self):
        self.assertEqual(self.train.returncode, 0, self.train.stderr)
        self.assertTrue(list(self.out.glob("checkpoint_*.bin")))
        self.assertTrue((self.out / "checkpoint_final.bin.json").exists())

    def test_summary_echoes_overrides_and_validates(self):
        summary = json.loads((self.out / "summary.json").read_text())
        validate(summary, "summary.schema.json")
        self.assertEqual(summary["config"]["train"]["lr"], 0.0001)
        self.assertEqual(summary["config"]["train"]["total_steps"], 1000)

    def test_metrics_lines_validate(self):
        lines = (self.out / "metrics.jsonl").read_text().splitlines()
        self.assertTrue(lines)
        for line in lines:
            validate(json.loads(line), "update.schema.json")

    def test_eval_is_deterministic(self):
        ckpt = str(self.out / "checkpoint_final.bin")
        first = run("eval", "--config", config("toy.ini"), "--ckpt", ckpt, "--episodes", "1")
        second = run("eval", "--config", config("toy.ini"), "--ckpt", ckpt, "--episodes", "1")
        self.assertEqual(first.returncode, 0, first.stderr)
        self.assertEqual(first.stdout, second.stdout)
        rows = [json.loads(l) for l in first.stdout.splitlines()]
        self.assertEqual(len(rows), 2)  # one episode row, then the summary
        for row in rows:
            validate(row, "metrics.schema.json")

    def test_eval_writes_rows(self):
        ckpt = str(self.out / "checkpoint_final.bin")
        dest = self.out / "eval"
        res = run("eval", "--config", config("toy.ini"), "--ckpt", ckpt, "--episodes", "3",
                  "--out", str(dest))
        self.assertEqual(res.returncode, 0, res.stderr)
        rows = (dest / "eval.jsonl").read_text().splitlines()
        self.assertEqual(len(rows), 3)
        validate(json.loads((dest / "eval_summary.json").read_text()), "metrics.schema.json")

    def test_export_trajectory(self):
        ckpt = str(self.out / "checkpoint_final.bin")
        dest = self.out / "traj.csv"
        res = run("export-traj", "--config", config("toy.ini"), "--ckpt", ckpt, "--out", str(dest))
        self.assertEqual(res.returncode, 0, res.stderr)
        lines = dest.read_text().splitlines()
        self.assertEqual(len(lines), 1 + 100 * 2)  # 1 s at 100 Hz, 2 agents
        self.assertTrue(lines[0].startswith("t,agent,x,y,z"))

    def test_policy_audit_on_checkpoint(self):
        ckpt = str(self.out / "checkpoint_final.bin")
        res = run("audit", "policy", "--config", config("toy.ini"), "--ckpt", ckpt,
                  "--group", "se3", "--n", "20")
        self.assertEqual(res.returncode, 0, res.stderr)
        report = json.loads(res.stdout)
        validate(report, "audit.schema.json")
        self.assertEqual(report["policy_equivariance"]["verdict"], "pass")


class Audits(unittest.TestCase):
    def audit(self, *args):
        res = run("audit", *args)
        return res, json.loads(res.stdout)

    def test_dynamics_se3_fails_with_gravity_residual(self):
        res, report = self.audit("dynamics", "--group", "se3", "--n", "100")
        self.assertEqual(res.returncode, 1)
        validate(report, "audit.schema.json")
        self.assertEqual(report["verdict"], "fail")
        self.assertAlmostEqual(report["extra"]["probe_residual"], 9.81 * 2 ** 0.5, delta=1e-6)

    def test_dynamics_se2z_passes(self):
        res, report = self.audit("dynamics", "--group", "se2z", "--n", "100")
        self.assertEqual(res.returncode, 0)
        self.assertLessEqual(report["dynamics_equivariance"]["residual"], 1e-9)

    def test_reward_passes(self):
        res, report = self.audit("reward", "--group", "se3", "--n", "50")
        self.assertEqual(res.returncode, 0)
        validate(report, "audit.schema.json")

    def test_pushforward_target(self):
        res, report = self.audit("pushforward", "--n", "4")
        self.assertEqual(res.returncode, 0)
        validate(report, "audit.schema.json")

    def test_audit_is_deterministic(self):
        a = run("audit", "dynamics", "--group", "so3", "--n", "20", "--seed", "4")
        b = run("audit", "dynamics", "--group", "so3", "--n", "20", "--seed", "4")
        self.assertEqual(a.stdout, b.stdout)

    def test_unknown_group_is_a_usage_error(self):
        res = run("audit", "dynamics", "--group", "so2")
        self.assertEqual(res.returncode, 2)
        self.assertIn("so2", res.stderr)

    def test_policy_audit_needs_a_checkpoint(self):
        self.assertEqual(run("audit", "policy").returncode, 2)


class Usage(unittest.TestCase):
    def test_missing_config_names_the_path(self):
        res = run("train", "--config", "/nonexistent/exp.ini")
        self.assertEqual(res.returncode, 2)
        self.assertIn("/nonexistent/exp.ini", res.stderr)

    def test_unknown_override_key(self):
        res = run("train", "--config", config("toy.ini"), "--override", "train.learning_rate=1")
        self.assertEqual(res.returncode, 2)
        self.assertIn("learning_rate", res.stderr)

    def test_bad_value_names_the_field(self):
        res = run("train", "--config", config("toy.ini"), "--override", "lr=fast")
        self.assertEqual(res.returncode, 2)
        self.assertIn("lr", res.stderr)

    def test_no_subcommand(self):
        self.assertEqual(run().returncode, 2)

    def test_demo_pushforward(self):
        res = run("demo-pushforward")
        self.assertEqual(res.returncode, 0)
        report = json.loads(res.stdout)
        validate(report, "pushforward.schema.json")
        self.assertLessEqual(report["equivariance_residual"], 1e-12)
        self.assertEqual(report["trajectory_deviation"], 0.0)

    def test_missing_checkpoint_names_the_path(self):
        res = run("eval", "--config", config("toy.ini"), "--ckpt", "/nonexistent.bin")
        self.assertEqual(res.returncode, 2)
        self.assertIn("/nonexistent.bin", res.stderr)


if __name__ == "__main__":
    BINARY = sys.argv.pop(1)
    SOURCE = pathlib.Path(sys.argv.pop(1))
    unittest.main(verbosity=2)
