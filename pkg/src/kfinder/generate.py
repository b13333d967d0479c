"""Seeded synthetic-data generators: Gaussian/sub-Gaussian mixtures and
stochastic block models, plus sample-size and anti-concentration helpers.

Reproducibility contract: a sample is a pure function of (spec, seed). Points
are drawn from per-point derived streams seeded by (seed, point index), so
generation stays byte-identical under any evaluation schedule.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .linalg import PointSet


@dataclass(frozen=True)
class MixtureComponent:
    mean: tuple
    cov: tuple  # row-major d x d
    weight: float
    family: str = "gaussian"  # gaussian | uniform-ball | rademacher

    def dim(self):
        return len(self.mean)


class MixtureSpec:
    """Mixture of pdfs: component means, covariances and weights."""

    def __init__(self, components):
        comps = []
        d = None
        total = 0.0
        for mean, cov, weight, *rest in (
            (c.mean, c.cov, c.weight, c.family) if isinstance(c, MixtureComponent)
            else tuple(c)
            for c in components
        ):
            family = rest[0] if rest else "gaussian"
            mean = np.asarray(mean, dtype=np.float64).reshape(-1)
            if d is None:
                d = mean.shape[0]
            if mean.shape[0] != d:
                raise ValueError("dim-mismatch: component means must share d")
            C = np.asarray(cov, dtype=np.float64).reshape(d, d)
            if np.max(np.abs(C - C.T)) > 1e-9:
                raise ValueError("bad-covariance: must be symmetric")
            evals = np.linalg.eigvalsh(C)
            if evals.min() < -1e-9:
                raise ValueError("bad-covariance: must be positive semidefinite")
            if weight <= 0:
                raise ValueError("bad-weight: component weights must be positive")
            total += weight
            comps.append(
                MixtureComponent(tuple(mean), tuple(C.reshape(-1)), float(weight), family)
            )
        if not comps:
            raise ValueError("empty-mixture")
        if abs(total - 1.0) > 1e-9:
            raise ValueError("bad-weight: weights must sum to 1")
        self.components = comps
        self.d = d

    @property
    def k(self):
        return len(self.components)

    def component_arrays(self, which):
        c = self.components[which]
        mean = np.asarray(c.mean)
        cov = np.asarray(c.cov).reshape(self.d, self.d)
        return mean, cov

    def weights(self):
        return np.array([c.weight for c in self.components])


def spherical_mixture(means, variance, weights=None):
    """Convenience builder: spherical components at the given means."""
    means = np.asarray(means, dtype=np.float64)
    k, d = means.shape
    if weights is None:
        weights = np.full(k, 1.0 / k)
    cov = np.eye(d) * variance
    return MixtureSpec([(m, cov, w) for m, w in zip(means, weights)])


class SbmSpec:
    """Stochastic block model: symmetric probability matrix and weights."""

    def __init__(self, prob_matrix, weights, n):
        P = np.asarray(prob_matrix, dtype=np.float64)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] != w.shape[0]:
            raise ValueError("dim-mismatch: need a k x k matrix and k weights")
        if np.max(np.abs(P - P.T)) > 1e-12:
            raise ValueError("bad-prob-matrix: must be symmetric")
        if P.min() < 0.0 or P.max() > 0.5:
            raise ValueError("bad-prob-matrix: entries must lie in [0, 0.5]")
        for l in range(P.shape[0]):
            if P[l, l] < P[l].max() - 1e-12:
                raise ValueError("bad-prob-matrix: intra must be >= inter per row")
        if w.min() <= 0 or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("bad-weight: weights must be positive and sum to 1")
        if n < 1:
            raise ValueError("bad-n")
        self.prob_matrix = P
        self.weights_ = w
        self.n = int(n)

    @property
    def k(self):
        return self.prob_matrix.shape[0]


class LabeledSample:
    """Sampled points plus their ground-truth labels (1-based)."""

    def __init__(self, points, labels, spec, rng_seed):
        self.points = points
        self.labels = np.asarray(labels, dtype=np.int64)
        if self.labels.shape[0] != points.n:
            raise ValueError("dim-mismatch: one label per point")
        if self.labels.min() < 1:
            raise ValueError("bad-label: labels are 1-based")
        self.spec = spec
        self.rng_seed = int(rng_seed)

    def realized_min_weight(self):
        _, counts = np.unique(self.labels, return_counts=True)
        return counts.min() / self.labels.shape[0]

    def label_indices(self):
        return [np.nonzero(self.labels == u)[0] for u in np.unique(self.labels)]


def _psd_sqrt(cov):
    evals, vecs = np.linalg.eigh(cov)
    evals = np.clip(evals, 0.0, None)
    return (vecs * np.sqrt(evals)) @ vecs.T


def sample_gaussian_mixture(spec, n, seed):
    """n iid draws from the mixture; component then offset per point stream."""
    d = spec.d
    weights = spec.weights()
    cum = np.cumsum(weights)
    roots = [
        _psd_sqrt(spec.component_arrays(j)[1]) for j in range(spec.k)
    ]
    means = [spec.component_arrays(j)[0] for j in range(spec.k)]
    pts = np.empty((n, d))
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        rng = np.random.default_rng((seed, 1, i))
        comp = int(np.searchsorted(cum, rng.random(), side="right"))
        comp = min(comp, spec.k - 1)
        c = spec.components[comp]
        if c.family == "gaussian":
            z = rng.standard_normal(d)
            pts[i] = means[comp] + roots[comp] @ z
        elif c.family == "uniform-ball":
            v = rng.standard_normal(d)
            nv = np.linalg.norm(v)
            v = v / nv if nv > 0 else v
            radius = rng.random() ** (1.0 / d)
            pts[i] = means[comp] + roots[comp] @ (v * radius)
        elif c.family == "rademacher":
            z = np.where(rng.random(d) < 0.5, -1.0, 1.0)
            pts[i] = means[comp] + roots[comp] @ z
        else:
            raise ValueError(f"bad-family: {c.family}")
        labels[i] = comp + 1
    return LabeledSample(PointSet(pts), labels, spec, seed)


def sample_sbm(spec, seed):
    """Adjacency-row point cloud of one SBM draw (no self-loops)."""
    n = spec.n
    cum = np.cumsum(spec.weights_)
    comm = np.empty(n, dtype=np.int64)
    for i in range(n):
        rng = np.random.default_rng((seed, 1, i))
        comm[i] = min(int(np.searchsorted(cum, rng.random(), side="right")), spec.k - 1)
    edge_rng = np.random.default_rng((seed, 2))
    U = edge_rng.random((n, n))
    P = spec.prob_matrix[np.ix_(comm, comm)]
    upper = np.triu(U < P, k=1)
    A = (upper | upper.T).astype(np.float64)
    return LabeledSample(PointSet(A), comm + 1, spec, seed)


def check_sbm_separation(spec, gamma, w0):
    """Exact arithmetic for the block-probability separation inequality:
    (P_ll - P_ll')^2 / P_max >= 400 max(gamma^2, ln n / w0^2) / n per pair."""
    P = spec.prob_matrix
    pmax = P.diagonal().max()
    rhs = 400.0 * max(gamma**2, math.log(spec.n) / w0**2) / spec.n
    if spec.k == 1:
        return True
    if pmax == 0.0:
        return False
    for l in range(spec.k):
        for lp in range(spec.k):
            if l == lp:
                continue
            if (P[l, l] - P[l, lp]) ** 2 / pmax < rhs:
                return False
    return True


def recommended_sample_size(kind, w0, kappa=None, d=None, sc_max=None):
    """Sample-size guidance: 100 ln(kbound) * sc / w0, floored at 1.

    kind='subgaussian' uses the bound sc <= 100 kappa^4 d^2; kind='generic'
    takes sc_max directly.
    """
    if not 0.0 < w0 <= 1.0:
        raise ValueError("bad-weight")
    kbound = math.ceil(1.0 / w0 - 1e-9)
    if kind == "subgaussian":
        if kappa is None or d is None or kappa < 1 or d < 1:
            raise ValueError("bad-argument: need kappa >= 1 and d >= 1")
        sc = 100.0 * kappa**4 * d**2
    elif kind == "generic":
        if sc_max is None or sc_max <= 0:
            raise ValueError("bad-argument: need sc_max > 0")
        sc = float(sc_max)
    else:
        raise ValueError("bad-kind: expected 'subgaussian' or 'generic'")
    return max(1, math.ceil(100.0 * math.log(kbound) * sc / w0))


def check_anti_concentration(spec, component, directions=64, grid=0, seed=0):
    """Analytic density-peak bound for a Gaussian component.

    The 1-D marginal along u is normal with std s(u); its peak 1/(s sqrt(2 pi))
    satisfies the 4/s^2 bound exactly when s <= 4 sqrt(2 pi). `grid` is
    accepted for interface compatibility; the Gaussian check needs no grid.
    """
    comp = spec.components[component]
    if comp.family != "gaussian":
        raise ValueError("analytic-check-unsupported: component is not Gaussian")
    _, cov = spec.component_arrays(component)
    bound = 4.0 * math.sqrt(2.0 * math.pi)
    rng = np.random.default_rng(seed)
    for _ in range(max(1, directions)):
        u = rng.normal(size=spec.d)
        nu = np.linalg.norm(u)
        if nu == 0:
            continue
        u /= nu
        s = math.sqrt(max(float(u @ cov @ u), 0.0))
        if s > bound:
            return False
    return True


# ---------------------------------------------------------------------------
# spec-file grammar (line oriented):
#   n = <int>                      seed = <int>
#   [component]                    one section per mixture component
#     weight = <float>
#     mean = <float> ...
#     cov = spherical <v> | diag <v1> ... | <row> ; <row> ; ...
#   [sbm]                          single section
#     weight = <w1> ... <wk>
#     prob_row = <p1> ... <pk>     one line per row
# ---------------------------------------------------------------------------


def _parse_floats(text):
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError as e:
        raise ParseError("bad-number", str(e)) from None


def _parse_cov(text, d):
    toks = text.split()
    if toks and toks[0] == "spherical":
        if len(toks) != 2:
            raise ParseError("bad-cov", "spherical takes one value")
        return np.eye(d) * float(toks[1])
    if toks and toks[0] == "diag":
        vals = _parse_floats(" ".join(toks[1:]))
        if len(vals) != d:
            raise ParseError("bad-cov", f"diag needs {d} values")
        return np.diag(vals)
    rows = [_parse_floats(r) for r in text.split(";")]
    if len(rows) != d or any(len(r) != d for r in rows):
        raise ParseError("bad-cov", f"expected {d} rows of {d} values")
    return np.asarray(rows)


def parse_generator_spec(text):
    """Parse a generator spec file; returns ('gmm'|'sbm', spec, n, seed)."""
    n = None
    seed = 0
    sections = []  # (name, {key: [values]})
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = (line[1:-1].strip().lower(), {})
            sections.append(current)
            continue
        if "=" not in line:
            raise ParseError("bad-line", f"line {lineno}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if current is None:
            if key == "n":
                n = int(val)
            elif key == "seed":
                seed = int(val)
            else:
                raise ParseError("bad-key", f"line {lineno}: unknown key {key!r}")
        else:
            current[1].setdefault(key, []).append(val)

    if not sections:
        raise ParseError("bad-spec", "no [component] or [sbm] section")
    kinds = {name for name, _ in sections}
    if kinds == {"component"}:
        comps = []
        for _, kv in sections:
            if "mean" not in kv or "weight" not in kv:
                raise ParseError("bad-spec", "component needs mean= and weight=")
            mean = np.asarray(_parse_floats(kv["mean"][0]))
            d = mean.shape[0]
            cov = (
                _parse_cov(kv["cov"][0], d) if "cov" in kv else np.eye(d)
            )
            family = kv.get("family", ["gaussian"])[0].strip().lower()
            comps.append((mean, cov, float(kv["weight"][0]), family))
        if n is None:
            raise ParseError("bad-spec", "mixture file needs n =")
        try:
            return "gmm", MixtureSpec(comps), n, seed
        except ValueError as e:
            raise ParseError("bad-spec", str(e)) from None
    if kinds == {"sbm"}:
        if len(sections) != 1:
            raise ParseError("bad-spec", "exactly one [sbm] section expected")
        kv = sections[0][1]
        if "weight" not in kv or "prob_row" not in kv:
            raise ParseError("bad-spec", "sbm needs weight= and prob_row= lines")
        weights = _parse_floats(kv["weight"][0])
        rows = [_parse_floats(r) for r in kv["prob_row"]]
        if n is None:
            raise ParseError("bad-spec", "sbm file needs n =")
        try:
            return "sbm", SbmSpec(np.asarray(rows), weights, n), n, seed
        except ValueError as e:
            raise ParseError("bad-spec", str(e)) from None
    raise ParseError("bad-spec", "mix of [component] and [sbm] sections")
