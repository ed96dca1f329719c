"""Command-line interface: file-in/file-out wrappers and experiment harnesses.

Conventions: `-` means stdin/stdout; file outputs are written atomically and
accompanied by a `<name>.manifest.json` sidecar recording the invocation.
Exit codes: 2 invalid flags or input schema, 3 generation retry exhaustion,
4 operation error; errors go to stderr as one JSON object.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass

import click
import numpy as np

from . import __version__, experiments
from .canonical import CanonicalModel, canonicalize, is_canonical
from .enumeration import enumerate_models
from .errors import GenerationError, LvlingamError, SchemaError
from .estimate import BasisEnsemble, align_ensemble, discover, test_zeros
from .mixing import MixingBasis, ZeroPattern, full_mixing, observed_basis, scramble
from .model import DataMatrix, GenerationConfig, LvModel, random_model, simulate
from .oica import MogSource, OicaConfig, bootstrap_fit, fit
from .util import atomic_write_text, canonical_json


@dataclass
class RunManifest:
    command: str
    flags: dict
    seed: "int | None"
    inputs: list[str]
    outputs: list[str]
    version: str
    duration_s: float

    def to_json_obj(self) -> dict:
        return {
            "command": self.command,
            "flags": self.flags,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "version": self.version,
            "duration_s": self.duration_s,
        }


class _Run:
    """Tracks one invocation: inputs read, outputs written, wall clock."""

    def __init__(self, command: str, flags: dict):
        self.command = command
        self.flags = {k: v for k, v in flags.items() if v is not None}
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.t0 = time.perf_counter()

    def read_text(self, path: str) -> str:
        if path == "-":
            self.inputs.append("<stdin>")
            return sys.stdin.read()
        self.inputs.append(path)
        with open(path) as fh:
            return fh.read()

    def read_json(self, path: str) -> dict:
        text = self.read_text(path)
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from exc

    def write(self, path: str, text: str) -> None:
        if path == "-":
            sys.stdout.write(text)
            return
        atomic_write_text(path, text)
        self.outputs.append(path)
        manifest = RunManifest(
            command=self.command,
            flags=self.flags,
            seed=self.flags.get("seed"),
            inputs=self.inputs,
            outputs=self.outputs,
            version=__version__,
            duration_s=time.perf_counter() - self.t0,
        )
        atomic_write_text(
            path + ".manifest.json", canonical_json(manifest.to_json_obj())
        )


def _fail(code: int, kind: str, message: str):
    sys.stderr.write(
        canonical_json({"error": {"type": kind, "message": message}})
    )
    sys.exit(code)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SchemaError as exc:
            _fail(2, "SchemaError", str(exc))
        except GenerationError as exc:
            _fail(3, "GenerationError", str(exc))
        except (LvlingamError, ValueError, FileNotFoundError) as exc:
            _fail(4, type(exc).__name__, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _parse_means(obj: dict) -> dict[int, float]:
    try:
        return {int(k): float(v) for k, v in obj["means"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad means JSON: {exc}") from exc


def _parse_sources(obj: dict) -> list[MogSource]:
    try:
        return [
            MogSource(
                tuple(float(x) for x in s["weights"]),
                tuple(float(x) for x in s["means"]),
                tuple(float(x) for x in s["variances"]),
            )
            for s in obj["sources"]
        ]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad sources JSON: {exc}") from exc
    except ValueError as exc:
        raise SchemaError(f"bad source distribution: {exc}") from exc


@click.group()
@click.version_option(__version__)
def main():
    """Causal discovery with hidden confounders for linear non-gaussian data."""


@main.command()
@click.option("--n-observed", type=int, required=True)
@click.option("--n-hidden", type=int, default=0, show_default=True)
@click.option("--edge-prob", type=float, default=0.4, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--max-retries", type=int, default=500, show_default=True)
@click.option("-o", "--output", default="-", show_default=True)
@_guarded
def generate(n_observed, n_hidden, edge_prob, seed, max_retries, output):
    """Generate a random latent-variable model."""
    run = _Run("generate", locals())
    config = GenerationConfig(
        n_observed=n_observed,
        n_hidden=n_hidden,
        edge_prob=edge_prob,
        max_retries=max_retries,
    )
    model = random_model(config, seed)
    run.write(output, canonical_json(model.to_json_obj()))


@main.command("canonicalize")
@click.argument("model_file", default="-")
@click.option("-o", "--output", default="-", show_default=True)
@_guarded
def canonicalize_cmd(model_file, output):
    """Reduce a model to its canonical form."""
    run = _Run("canonicalize", {"model_file": model_file, "output": output})
    model = LvModel.from_json_obj(run.read_json(model_file))
    result = canonicalize(model)
    run.write(output, canonical_json(result.model.to_json_obj()))


@main.command("simulate")
@click.argument("model_file", default="-")
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("-o", "--output", default="-", show_default=True)
@_guarded
def simulate_cmd(model_file, n, seed, output):
    """Draw samples of the observed variables as CSV."""
    run = _Run("simulate", {"model_file": model_file, "n": n, "seed": seed})
    model = LvModel.from_json_obj(run.read_json(model_file))
    data = simulate(model, n, seed)
    run.write(output, data.to_csv())


@main.command("mixing")
@click.argument("model_file", default="-")
@click.option("--full", "emit_full", is_flag=True, help="Emit the square full matrix.")
@click.option("--scramble-seed", type=int, default=None)
@click.option("-o", "--output", default="-", show_default=True)
@_guarded
def mixing_cmd(model_file, emit_full, scramble_seed, output):
    """Mixing basis of a canonical model (observed rows by default)."""
    run = _Run("mixing", locals())
    model = LvModel.from_json_obj(run.read_json(model_file))
    ok, violations = is_canonical(model)
    if not ok:
        raise LvlingamError(
            "model is not canonical (run `canonicalize` first): " + violations[0]
        )
    cm = CanonicalModel(model, certified=True)
    basis = full_mixing(cm) if emit_full else observed_basis(cm)
    if scramble_seed is not None:
        basis = scramble(basis, scramble_seed)
    run.write(output, canonical_json(basis.to_json_obj()))


@main.command("enumerate")
@click.option("--basis", "basis_file", required=True)
@click.option("--zero", "zero_file", required=True)
@click.option("--means", "means_file", required=True)
@click.option("-o", "--output", default="-", show_default=True)
@_guarded
def enumerate_cmd(basis_file, zero_file, means_file, output):
    """All canonical models compatible with an exact-zero basis."""
    run = _Run("enumerate", locals())
    basis = MixingBasis.from_json_obj(run.read_json(basis_file))
    zero = ZeroPattern.from_json_obj(run.read_json(zero_file))
    means = _parse_means(run.read_json(means_file))
    eq = enumerate_models(basis, zero, means)
    payload = {
        "models": [
            {"classification": list(cls), "model": cm.model.to_json_obj()}
            for cm, cls in zip(eq.models, eq.classifications)
        ]
    }
    run.write(output, canonical_json(payload))


@main.command("estimate-basis")
@click.option("--data", "data_file", required=True)
@click.option("--sources", "sources_file", required=True)
@click.option("--seed", type=int, required=True)
@click.option("--sensor-var", type=float, default=1e-4, show_default=True)
@click.option("--restarts", type=int, default=10, show_default=True)
@click.option("--max-iter", type=int, default=500, show_default=True)
@click.option("--tol", type=float, default=1e-7, show_default=True)
@click.option("--bootstrap", "bootstrap_k", type=int, default=None,
              help="Also emit a bootstrap ensemble of this size.")
@click.option("-o", "--output", default="-", show_default=True)
@_guarded
def estimate_basis_cmd(
    data_file, sources_file, seed, sensor_var, restarts, max_iter, tol,
    bootstrap_k, output,
):
    """Estimate the (overcomplete) mixing basis from data by EM."""
    run = _Run("estimate-basis", locals())
    data = DataMatrix.from_csv(run.read_text(data_file))
    sources = _parse_sources(run.read_json(sources_file))
    config = OicaConfig(
        sensor_var=sensor_var,
        max_iter=max_iter,
        tol=tol,
        restarts=restarts,
        seed=seed,
    )
    result = fit(data, sources, config)
    payload = {
        "basis": result.basis.to_json_obj(),
        "loglik": result.loglik,
        "converged": result.converged,
        "n_iter": result.n_iter,
        "means": {
            str(vid): float(mv) for vid, mv in zip(data.columns, result.means)
        },
        "sensor_var": result.sensor_var,
    }
    if bootstrap_k is not None:
        ensemble = bootstrap_fit(data, sources, config, bootstrap_k, full_fit=result)
        payload["ensemble"] = ensemble.to_json_obj()
    run.write(output, canonical_json(payload))


@main.command("discover")
@click.option("--ensemble", "ensemble_file", required=True)
@click.option("--means", "means_file", required=True)
@click.option("--zero-z", type=float, default=3.0, show_default=True)
@click.option("--effect-z", type=float, default=2.0, show_default=True)
@click.option("--quorum", type=float, default=0.5, show_default=True)
@click.option("-o", "--output", default="-", show_default=True)
@_guarded
def discover_cmd(ensemble_file, means_file, zero_z, effect_z, quorum, output):
    """Run the resampling pipeline on an ensemble of basis estimates."""
    run = _Run("discover", locals())
    ensemble = BasisEnsemble.from_json_obj(run.read_json(ensemble_file))
    means = _parse_means(run.read_json(means_file))
    zero = test_zeros(align_ensemble(ensemble), zero_z)
    summaries = discover(
        ensemble, means, zero_z=zero_z, effect_z=effect_z, quorum=quorum
    )
    payload = {
        "zero_mask": zero.to_json_obj()["mask"],
        "summaries": [s.to_json_obj() for s in summaries],
    }
    run.write(output, canonical_json(payload))


@main.command("experiment1")
@click.option("--trials", type=int, default=200, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--n-obs-min", type=int, default=3, show_default=True)
@click.option("--n-obs-max", type=int, default=6, show_default=True)
@click.option("--n-hidden-min", type=int, default=0, show_default=True)
@click.option("--n-hidden-max", type=int, default=2, show_default=True)
@click.option("-o", "--output", default="-", show_default=True)
@_guarded
def experiment1_cmd(
    trials, seed, n_obs_min, n_obs_max, n_hidden_min, n_hidden_max, output
):
    """Exact-basis study: exactly one causally equivalent model per trial."""
    run = _Run("experiment1", locals())
    report = experiments.experiment1(
        trials, seed, (n_obs_min, n_obs_max), (n_hidden_min, n_hidden_max)
    )
    run.write(output, canonical_json(report))
    if report["passes"] != trials:
        raise LvlingamError(
            f"{trials - report['passes']} trial(s) violated the exactly-one property"
        )


@main.command("experiment2")
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--sigma", type=float, default=0.005, show_default=True,
              help="Noise sd as a fraction of max|A|.")
@click.option("--k", type=int, default=20, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--close-tol", type=float, default=0.05, show_default=True)
@click.option("--n-obs-min", type=int, default=3, show_default=True)
@click.option("--n-obs-max", type=int, default=5, show_default=True)
@click.option("--n-hidden", type=int, default=1, show_default=True)
@click.option("-o", "--output", default="-", show_default=True)
@_guarded
def experiment2_cmd(
    trials, sigma, k, seed, close_tol, n_obs_min, n_obs_max, n_hidden, output
):
    """Perturbed-ensemble study: recovery rate of close direct effects."""
    run = _Run("experiment2", locals())
    report = experiments.experiment2(
        trials,
        sigma,
        seed,
        k=k,
        close_tol=close_tol,
        n_obs_range=(n_obs_min, n_obs_max),
        n_hidden=n_hidden,
    )
    run.write(output, canonical_json(report))


@main.command("experiment3")
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--trials", type=int, default=1, show_default=True)
@click.option("--model", "model_file", default=None,
              help="Canonical model JSON to use instead of the built-in demo.")
@click.option("--k-bootstrap", type=int, default=8, show_default=True)
@click.option("--restarts", type=int, default=6, show_default=True)
@click.option("-o", "--output", default="-", show_default=True)
@_guarded
def experiment3_cmd(n, seed, trials, model_file, k_bootstrap, restarts, output):
    """Data-driven demo: estimate the basis from samples, then discover."""
    run = _Run("experiment3", locals())
    model = None
    if model_file is not None:
        raw = LvModel.from_json_obj(run.read_json(model_file))
        ok, violations = is_canonical(raw)
        if not ok:
            raise LvlingamError("supplied model is not canonical: " + violations[0])
        model = CanonicalModel(raw, certified=True)
    report = experiments.experiment3(
        n, seed, trials=trials, model=model,
        k_bootstrap=k_bootstrap, restarts=restarts,
    )
    run.write(output, canonical_json(report))


if __name__ == "__main__":
    main()
