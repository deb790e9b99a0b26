"""Simulation studies: design generation, Monte Carlo harness, CSV output.

Random streams are derived from the root seed by fixed spawn keys, so each
(noise level, replication) cell draws the same numbers regardless of how
replications are scheduled.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import bounds as bd
from . import respoly as rp
from .errors import CombinatorialCapError, ConfigError, ValidationError
from .pls_core import pls_fit
from .spectral import decompose, project

_DESIGN, _BETA, _NOISE, _SPECTRUM = 0, 1, 2, 3


@dataclass(frozen=True)
class SpectrumSpec:
    """Eigenvalue specification for generated designs.

    ``kind`` is ``"explicit"`` (``values``), ``"clusters"`` (``centers``,
    ``spread`` as a fraction of each center, ``counts``) or ``"gap"``
    (``c`` eigenvalues in [2, 20], the remaining ``r - c`` in [0.1, 0.5]).
    """

    kind: str
    values: tuple = ()
    centers: tuple = ()
    spread: float = 0.01
    counts: tuple = ()
    c: int = 0
    r: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("explicit", "clusters", "gap"):
            raise ValidationError(f"unknown spectrum kind {self.kind!r}")
        if self.kind == "explicit" and (not self.values or min(self.values) <= 0):
            raise ValidationError("explicit spectrum needs positive values")
        if self.kind == "clusters":
            if len(self.centers) != len(self.counts) or not self.centers:
                raise ValidationError("clusters need matching centers and counts")
            cs = np.sort(np.asarray(self.centers, dtype=float))
            if cs[0] <= 0 or self.spread < 0 or self.spread >= 1:
                raise ValidationError("cluster centers must be positive and spread in [0, 1)")
            if len(cs) > 1 and np.max(cs * self.spread) >= 0.5 * np.min(np.diff(cs)):
                raise ValidationError("cluster spread must be below half the minimum center gap")
        if self.kind == "gap" and self.c < 1:
            raise ValidationError("gap spectrum needs c >= 1")

    def size(self, default: int) -> int:
        if self.kind == "explicit":
            return len(self.values)
        if self.kind == "clusters":
            return int(sum(self.counts))
        return self.r if self.r is not None else default

    def sample(self, rng: np.random.Generator, default_size: int) -> np.ndarray:
        if self.kind == "explicit":
            lam = np.asarray(self.values, dtype=float)
        elif self.kind == "clusters":
            parts = [c * (1.0 + self.spread * rng.uniform(-1.0, 1.0, m))
                     for c, m in zip(self.centers, self.counts)]
            lam = np.concatenate(parts)
        else:
            r = self.size(default_size)
            if self.c > r:
                raise ValidationError(f"gap spectrum: c={self.c} exceeds r={r}")
            lam = np.concatenate([rng.uniform(2.0, 20.0, self.c), rng.uniform(0.1, 0.5, r - self.c)])
        return np.sort(lam)[::-1]


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 100
    p: int = 100
    spectrum: SpectrumSpec = field(default_factory=lambda: SpectrumSpec(
        "clusters", centers=(10.0, 1.0), spread=0.01, counts=(50, 50)))
    beta_spec: str = "equal"
    noise_levels: tuple = (0.1,)
    reps: int = 100
    k_range: tuple = tuple(range(1, 11))
    seed: int = 0
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps must be >= 1", field="reps")
        if not self.k_range or min(self.k_range) < 1:
            raise ConfigError("every k must be >= 1", field="k_range")
        if any(s < 0 for s in self.noise_levels):
            raise ConfigError("noise levels must be >= 0", field="noise_levels")
        if self.n < 2 or self.p < 1:
            raise ConfigError("need n >= 2 and p >= 1", field="n")

    @property
    def k_max(self) -> int:
        return max(self.k_range)

    def describe(self) -> str:
        return format_config(self)

    def digest(self) -> str:
        return hashlib.sha256(self.describe().encode()).hexdigest()[:16]


# --- config text format ----------------------------------------------------


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "-" in item[1:]:
            lo, hi = item.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(item))
    return tuple(out)


def parse_spectrum(text: str) -> SpectrumSpec:
    """Parse ``kind; key=value; ...`` (e.g. ``gap; c=5``)."""
    parts = [s.strip() for s in text.split(";") if s.strip()]
    if not parts:
        raise ValidationError("empty spectrum specification")
    kind, opts = parts[0], {}
    for part in parts[1:]:
        key, sep, val = part.partition("=")
        if not sep:
            raise ValidationError(f"spectrum option {part!r} is not key=value")
        opts[key.strip()] = val.strip()
    kw = {}
    for key, val in opts.items():
        if key in ("values", "centers"):
            kw[key] = _floats(val)
        elif key == "counts":
            kw[key] = _ints(val)
        elif key == "spread":
            kw[key] = float(val)
        elif key in ("c", "r"):
            kw[key] = int(val)
        else:
            raise ValidationError(f"unknown spectrum option {key!r}")
    return SpectrumSpec(kind, **kw)


def _format_spectrum(spec: SpectrumSpec) -> str:
    join = lambda xs: ",".join(repr(x) for x in xs)  # noqa: E731
    if spec.kind == "explicit":
        return f"explicit; values={join(spec.values)}"
    if spec.kind == "clusters":
        return f"clusters; centers={join(spec.centers)}; spread={spec.spread!r}; counts={join(spec.counts)}"
    out = f"gap; c={spec.c}"
    return out + (f"; r={spec.r}" if spec.r is not None else "")


def format_config(cfg: ExperimentConfig) -> str:
    lines = [
        f"n = {cfg.n}",
        f"p = {cfg.p}",
        f"spectrum = {_format_spectrum(cfg.spectrum)}",
        f"beta_spec = {cfg.beta_spec}",
        f"noise_levels = {','.join(repr(float(s)) for s in cfg.noise_levels)}",
        f"reps = {cfg.reps}",
        f"k_range = {','.join(str(k) for k in cfg.k_range)}",
        f"seed = {cfg.seed}",
    ]
    if cfg.output_dir is not None:
        lines.append(f"output_dir = {cfg.output_dir}")
    return "\n".join(lines) + "\n"


_CONVERTERS = {
    "n": int,
    "p": int,
    "spectrum": parse_spectrum,
    "beta_spec": str,
    "noise_levels": _floats,
    "reps": int,
    "k_range": _ints,
    "seed": int,
    "output_dir": str,
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the ``key = value`` format; ``#`` starts a comment."""
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ConfigError("expected 'key = value'", line=lineno)
        if key not in _CONVERTERS:
            raise ConfigError("unknown key", field=key, line=lineno)
        if key in values:
            raise ConfigError("duplicate key", field=key, line=lineno)
        try:
            values[key] = _CONVERTERS[key](val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value {val!r}: {exc}", field=key, line=lineno) from None
        lines[key] = lineno
    if values.get("seed", 0) < 0 or values.get("seed", 0) >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", field="seed", line=lines.get("seed"))
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        raise ConfigError(exc.reason, field=exc.field, line=lines.get(exc.field)) from None


def load_config(path) -> ExperimentConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config(fh.read())


# --- data generation -------------------------------------------------------


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _haar(rng, m, r):
    Q, R = np.linalg.qr(rng.standard_normal((m, m)))
    Q = Q * np.sign(np.diag(R))
    return Q[:, :r]


def generate_design(spec: SpectrumSpec, n: int, p: int, seed, return_factors: bool = False):
    """Random design ``U diag(sqrt(lambda)) V^T`` with Haar-distributed factors."""
    r = spec.size(min(n, p))
    if r > min(n, p):
        raise ValidationError(f"spectrum of size {r} does not fit a {n}x{p} design")
    lam = spec.sample(_rng(seed, _SPECTRUM), min(n, p))
    rng = _rng(seed, _DESIGN)
    U, V = _haar(rng, n, r), _haar(rng, p, r)
    X = (U * np.sqrt(lam)) @ V.T
    if return_factors:
        return X, lam, U, V
    return X


def make_beta(beta_spec: str, V: np.ndarray, seed) -> np.ndarray:
    """True coefficients: ``equal`` (unit norm, equal weight on every right
    singular direction), ``random`` (unit-norm Gaussian direction) or
    ``fixed; values=...``."""
    kind, _, rest = beta_spec.partition(";")
    kind = kind.strip()
    p, r = V.shape
    if kind == "equal":
        return V @ np.full(r, 1.0 / math.sqrt(r))
    if kind == "random":
        b = _rng(seed, _BETA).standard_normal(p)
        return b / np.linalg.norm(b)
    if kind == "fixed":
        key, _, vals = rest.partition("=")
        beta = np.array(_floats(vals))
        if key.strip() != "values" or beta.shape != (p,):
            raise ValidationError(f"fixed beta needs 'values=' with {p} entries")
        return beta
    raise ValidationError(f"unknown beta_spec {beta_spec!r}")


def _setup(cfg: ExperimentConfig):
    X, lam, U, V = generate_design(cfg.spectrum, cfg.n, cfg.p, cfg.seed, return_factors=True)
    beta = make_beta(cfg.beta_spec, V, cfg.seed)
    return X, beta, decompose(X)


def _noise(cfg, s_idx, rep, sigma):
    return sigma * _rng(cfg.seed, _NOISE, s_idx, rep).standard_normal(cfg.n)


def _pad(arr, length):
    """Extend a path array past its grade by repeating the terminal step."""
    if arr.shape[0] >= length:
        return arr[:length]
    return np.concatenate([arr, np.repeat(arr[-1:], length - arr.shape[0], axis=0)])


# --- records ---------------------------------------------------------------


@dataclass
class RunRecord:
    """Aggregated study output: a flat table plus run metadata."""

    config_hash: str
    name: str
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)

    def column(self, name, **where):
        return np.array([row[name] for row in self.rows
                         if all(row[k] == v for k, v in where.items())])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(row[c]) for c in self.columns])


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


_PLOT_TEMPLATE = '''"""Plot {csv_name} (generated)."""
import csv
import sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

Y_COLUMNS = {ys!r}
GROUP = {group!r}

series = defaultdict(lambda: ([], []))
with open("{csv_name}") as fh:
    for row in csv.DictReader(fh):
        for col in Y_COLUMNS:
            label = col if GROUP is None else f"{{col}}, {{GROUP}}={{row[GROUP]}}"
            xs, ys = series[label]
            xs.append(float(row["k"]))
            ys.append(abs(float(row[col])) if "{yscale}" == "log" else float(row[col]))

fig, ax = plt.subplots()
for label, (xs, ys) in sorted(series.items()):
    ax.plot(xs, ys, marker="o", label=label)
ax.set_xlabel("k")
ax.set_yscale("{yscale}")
ax.legend(fontsize="small")
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "{png_name}")
'''


def write_outputs(record: RunRecord, out_dir, y, group: Optional[str] = "sigma",
                  yscale: str = "log") -> str:
    """Write ``<name>.csv`` and a companion ``plot_<name>.py``; returns the CSV path.

    ``y`` is one column name or a list of them; ``group`` splits rows into
    separate curves.
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_name = f"{record.name}.csv"
    path = os.path.join(out_dir, csv_name)
    record.write_csv(path)
    ys = [y] if isinstance(y, str) else list(y)
    script = _PLOT_TEMPLATE.format(csv_name=csv_name, group=group, ys=ys, yscale=yscale,
                                   png_name=f"{record.name}.png")
    with open(os.path.join(out_dir, f"plot_{record.name}.py"), "w") as fh:
        fh.write(script)
    return path


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _aggregate(samples):
    samples = np.asarray(samples)
    mean = samples.mean(axis=0)
    if samples.shape[0] > 1:
        se = samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])
    else:
        se = np.zeros_like(mean)
    return mean, se


# --- studies ---------------------------------------------------------------


def run_risk_study(cfg: ExperimentConfig, workers: int = 1) -> RunRecord:
    """Empirical risk ``(1/n)||Y - X beta_k||^2`` against its upper bound."""
    X, beta, decomp = _setup(cfg)
    signal = X @ beta
    ks = np.array(cfg.k_range)
    rows = []
    truncated = 0
    for s_idx, sigma in enumerate(cfg.noise_levels):
        def one(rep, sigma=sigma, s_idx=s_idx):
            Y = signal + _noise(cfg, s_idx, rep, sigma)
            path = pls_fit(X, Y, cfg.k_max, decomp=decomp)
            risk = _pad(path.residual_norms, cfg.k_max) ** 2 / cfg.n
            return risk[ks - 1], path.truncated

        out = _map(one, range(cfg.reps), workers)
        truncated += sum(t for _, t in out)
        mean, se = _aggregate([r for r, _ in out])
        for j, k in enumerate(ks):
            b = bd.empirical_risk_bound(decomp, beta, sigma**2, int(k), n=cfg.n)
            rows.append(dict(sigma=float(sigma), k=int(k), chem_factor=b.chem_factor,
                             bound=b.bound, observed_mean=float(mean[j]),
                             observed_se=float(se[j])))
    cols = ["sigma", "k", "chem_factor", "bound", "observed_mean", "observed_se"]
    return RunRecord(cfg.digest(), "risk", cols, rows,
                     meta=dict(truncated_paths=int(truncated), reps=cfg.reps))


def run_prediction_study(cfg: ExperimentConfig, workers: int = 1) -> RunRecord:
    """Prediction error ``(1/n)||X beta* - X beta_k||^2`` and its two-term split."""
    X, beta, decomp = _setup(cfg)
    signal = X @ beta
    ks = np.array(cfg.k_range)
    clean = pls_fit(X, signal, cfg.k_max, decomp=decomp)
    f_star = _pad(clean.filter_factors, cfg.k_max)
    rows = []
    for s_idx, sigma in enumerate(cfg.noise_levels):
        def one(rep, sigma=sigma, s_idx=s_idx):
            Y = signal + _noise(cfg, s_idx, rep, sigma)
            path = pls_fit(X, Y, cfg.k_max, decomp=decomp)
            fitted = _pad(path.fitted, cfg.k_max)
            f_hat = _pad(path.filter_factors, cfg.k_max)
            res = np.empty((len(ks), 5))
            for j, k in enumerate(ks):
                dec = bd.prediction_decomposition(decomp, Y, beta, fitted[k - 1], f_star[k - 1])
                gap = np.nanmax(np.abs(f_hat[k - 1] - f_star[k - 1]))
                res[j] = (dec.lhs, dec.term_projection, dec.term_subspace, dec.violation, gap)
            return res

        out = np.array(_map(one, range(cfg.reps), workers))
        mean, se = _aggregate(out[:, :, 0])
        median = np.median(out[:, :, 0], axis=0)
        for j, k in enumerate(ks):
            rows.append(dict(
                sigma=float(sigma), k=int(k),
                pred_mean=float(mean[j]), pred_se=float(se[j]), pred_median=float(median[j]),
                term_projection_mean=float(out[:, j, 1].mean()),
                term_subspace_mean=float(out[:, j, 2].mean()),
                decomp_max_violation=float(out[:, j, 3].max()),
                q_gap_mean=float(out[:, j, 4].mean()),
            ))
    cols = ["sigma", "k", "pred_mean", "pred_se", "pred_median", "term_projection_mean",
            "term_subspace_mean", "decomp_max_violation", "q_gap_mean"]
    return RunRecord(cfg.digest(), "prediction", cols, rows, meta=dict(grade_clean=clean.k_max))


def run_residual_path(cfg: ExperimentConfig, direction_indices, cap: int = rp.DEFAULT_CAP) -> RunRecord:
    """``Q_k(lambda_i)`` for ``k = 1..k_max`` along selected eigendirections.

    Uses one realization at the first noise level. Each row is cross-checked
    against the subset-sum formula when the enumeration fits under ``cap``;
    otherwise ``vandermonde_checked`` is false.
    """
    X, beta, decomp = _setup(cfg)
    idx = [int(i) for i in direction_indices]
    if not idx or min(idx) < 0 or max(idx) >= decomp.rank:
        raise ValidationError(f"direction indices must lie in 0..{decomp.rank - 1}")
    sigma = cfg.noise_levels[0]
    Y = X @ beta + _noise(cfg, 0, 0, sigma)
    proj = project(decomp, Y)
    path = pls_fit(X, Y, cfg.k_max, decomp=decomp)
    rows = []
    for k in range(1, path.k_max + 1):
        q = 1.0 - path.filter_factors[k - 1]
        row = dict(k=k, q_at_zero=1.0)
        for i in idx:
            row[f"Q_{i}"] = float(q[i])
        try:
            _, qv = rp.residual_values_vandermonde(decomp, proj.p_hat, k, cap, points=decomp.eigenvalues[idx])
            row["vandermonde_checked"] = True
            row["max_route_gap"] = float(np.max(np.abs(qv - q[idx])))
        except CombinatorialCapError:
            row["vandermonde_checked"] = False
            row["max_route_gap"] = float("nan")
        rows.append(row)
    cols = ["k", "q_at_zero"] + [f"Q_{i}" for i in idx] + ["vandermonde_checked", "max_route_gap"]
    return RunRecord(cfg.digest(), "residual_path", cols, rows,
                     meta=dict(truncated=path.truncated, sigma=sigma))


def run_bound_table(cfg: ExperimentConfig, constants: bd.BoundConstants = bd.BoundConstants()) -> RunRecord:
    """Closed-form bound values per (sigma, k) without simulation."""
    X, beta, decomp = _setup(cfg)
    proj = project(decomp, X @ beta, beta_star=beta)
    lam = decomp.eigenvalues
    rows = []
    for sigma in cfg.noise_levels:
        for k in cfg.k_range:
            rb = bd.empirical_risk_bound(decomp, beta, sigma**2, k, n=cfg.n)
            env = bd.minimax_envelope(lam[-1], lam[0], k).minimax_value
            try:
                pb = bd.prediction_error_bound(decomp, proj, k, constants, n=cfg.n)
                t_reg, t_sub = pb.term_regularization, pb.term_subspace
            except ValidationError:
                t_reg = t_sub = float("nan")
            rows.append(dict(sigma=float(sigma), k=int(k), chem_factor=rb.chem_factor,
                             minimax_value=env, bound=rb.bound,
                             bound_minimax=env**2 * (rb.signal + rb.noise_var),
                             term_regularization=t_reg, term_subspace=t_sub))
    cols = ["sigma", "k", "chem_factor", "minimax_value", "bound", "bound_minimax",
            "term_regularization", "term_subspace"]
    return RunRecord(cfg.digest(), "bounds", cols, rows)


# --- three-route verification ---------------------------------------------


def random_instance(r: int, seed, min_gap: float = 0.05, min_proj: float = 0.1, n: Optional[int] = None):
    """Small instance with distinct eigenvalues and a response with given ``p_hat``.

    Consecutive eigenvalues differ by a relative factor in
    ``[1 + min_gap, 1.6]`` and every ``|p_hat_i| >= min_proj``.
    Returns ``(X, Y)``.
    """
    n = r if n is None else n
    rng = _rng(seed, 7)
    ratios = np.exp(rng.uniform(math.log1p(min_gap), math.log(1.6), r))
    lam = np.cumprod(ratios)[::-1]
    U, V = _haar(rng, n, r), _haar(rng, r, r)
    X = (U * np.sqrt(lam)) @ V.T
    p_hat = rng.choice([-1.0, 1.0], r) * rng.uniform(min_proj, 1.5, r)
    return X, U @ p_hat


def route_disagreement(X, Y, k_values=None, rtol: float = 1e-6, atol: float = 1e-8) -> dict:
    """Compare the fit, moment (exact rational) and subset-sum routes.

    Returns the largest pairwise gap in units of the tolerance
    ``max(rtol * |value|, atol)`` (pass when <= 1), the largest absolute gap,
    the worst orthogonality defect and the worst weight-sum error.
    """
    decomp = decompose(X)
    proj = project(decomp, Y)
    r = decomp.rank
    path = pls_fit(X, Y, r, decomp=decomp)
    measure = rp.build_measure(decomp, proj.p_hat)
    k_values = range(1, min(path.k_max, r - 1) + 1) if k_values is None else k_values
    worst_scaled = worst_abs = worst_weight = 0.0
    min_weight = math.inf
    polys = []
    for k in k_values:
        fit = rp.residual_poly_from_fit(path, proj, k)
        mom = rp.residual_poly_moments(measure, k, exact=True, spectrum=decomp.eigenvalues)
        weights, van = rp.residual_values_vandermonde(decomp, proj.p_hat, k)
        polys.append(fit)
        for a, b in ((fit.values_on_spectrum, mom.values_on_spectrum),
                     (fit.values_on_spectrum, van), (mom.values_on_spectrum, van)):
            gap = np.abs(a - b)
            tol = np.maximum(rtol * np.maximum(np.abs(a), np.abs(b)), atol)
            worst_scaled = max(worst_scaled, float(np.max(gap / tol)))
            worst_abs = max(worst_abs, float(np.max(gap)))
        worst_weight = max(worst_weight, abs(float(weights.weights.sum()) - 1.0))
        min_weight = min(min_weight, float(weights.weights.min()))
    limit = min(len(polys), 8)
    defect = rp.orthogonality_defect(polys[:limit], measure) if limit > 1 else np.zeros((1, 1))
    return dict(rank=r, max_scaled_gap=worst_scaled, max_abs_gap=worst_abs,
                max_orthogonality_defect=float(defect.max()),
                max_weight_sum_error=worst_weight, min_weight=min_weight)
