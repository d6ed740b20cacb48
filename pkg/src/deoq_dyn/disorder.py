"""Quasi-static disorder averaging of the qubit return probabilities.

The dot-to-dot field gradient delta_e carries a zero-mean Gaussian of
standard deviation sqrt(2) sigma_e, and each inter-dot exchange coupling j_i
carries a Gaussian of width sigma_ji truncated to j_i >= 0 around mean j0i.
The observable is the ensemble average of the closed-form return
probability.  Two independent routes compute it:

* deterministic tensor quadrature (Gauss-Hermite or pdf-weighted
  Gauss-Legendre in delta_e, pdf-weighted Gauss-Legendre per coupling), and
* a Monte Carlo estimator with per-point standard errors, used as an oracle.

Because the integrand oscillates as cos(omega(x) t), the node count a
dimension needs grows linearly with the phase span t_max * d(omega)/dx *
range(x).  ``adaptive_quadrature_spec`` sizes node counts that way;
fixed-size specs are kept for small problems and for reproducing the
plain-rule behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.signal
import scipy.special
from scipy.special import roots_hermite

from .qubit import ExchangeParams, oscillation_terms

# phase step per frequency bin of the binned evaluator; the linear-deposit
# error is bounded by (step)^2/6 ~ 1e-6 of the deposited mass
_BIN_PHASE_STEP = 2.4e-3

# switch from direct node-times summation to the binned evaluator above
# this many node*time products
_DIRECT_LIMIT = 2 ** 25


@dataclass(frozen=True)
class NoiseSpec:
    """Widths and means of the quasi-static noise distributions (j0 units).

    sigma_e parameterizes the field-gradient Gaussian (its standard
    deviation is sqrt(2) sigma_e); sigma_j1, sigma_j2 are the widths of the
    truncated Gaussians around means j01, j02.
    """

    sigma_e: float = 0.0
    sigma_j1: float = 0.0
    sigma_j2: float = 0.0
    j01: float = 0.5
    j02: float = 1.5

    def __post_init__(self) -> None:
        for name in ("sigma_e", "sigma_j1", "sigma_j2", "j01", "j02"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts and truncation for the tensor quadrature.

    n_hermite counts the delta_e nodes, n_legendre the nodes per exchange
    coupling, truncation_width the half-range of each truncated dimension in
    units of that dimension's standard deviation.  delta_e_rule selects the
    delta_e rule: "hermite" uses Gauss-Hermite in u = delta_e/(2 sigma_e)
    (whose weight matches the gradient pdf exactly), "legendre" uses a
    pdf-weighted Gauss-Legendre rule, which tracks oscillatory integrands
    with far fewer nodes at large t_max * sigma_e.
    """

    n_hermite: int = 21
    n_legendre: int = 41
    truncation_width: float = 6.0
    delta_e_rule: str = "hermite"

    def __post_init__(self) -> None:
        if int(self.n_hermite) < 1 or int(self.n_hermite) != self.n_hermite:
            raise ValueError(f"n_hermite must be an integer >= 1, got {self.n_hermite!r}")
        if int(self.n_legendre) < 1 or int(self.n_legendre) != self.n_legendre:
            raise ValueError(f"n_legendre must be an integer >= 1, got {self.n_legendre!r}")
        if not (math.isfinite(self.truncation_width) and self.truncation_width > 0):
            raise ValueError(f"truncation_width must be > 0, got {self.truncation_width!r}")
        if self.delta_e_rule not in ("hermite", "legendre"):
            raise ValueError(f"delta_e_rule must be 'hermite' or 'legendre', got {self.delta_e_rule!r}")


@dataclass(frozen=True)
class ProbabilityTrace:
    """Disorder-averaged return probability on a uniform time grid."""

    times: np.ndarray
    values: np.ndarray
    initial: str
    method: str
    params: ExchangeParams
    noise: NoiseSpec
    mc_std_errors: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        _validate_times(times)
        if values.shape != times.shape:
            raise ValueError("values and times must have the same shape")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        if self.initial not in ("zero", "superposition"):
            raise ValueError(f"initial must be 'zero' or 'superposition', got {self.initial!r}")
        expected0 = 1.0 if self.initial == "zero" else 0.5
        if abs(values[0] - expected0) > 1e-9:
            raise ValueError(
                f"value at t=0 is {values[0]!r}, expected {expected0} for initial={self.initial!r}"
            )
        if self.mc_std_errors is not None:
            errs = np.asarray(self.mc_std_errors, dtype=float)
            if errs.shape != times.shape:
                raise ValueError("mc_std_errors must match the time grid")
            object.__setattr__(self, "mc_std_errors", errs)


def _validate_times(times: np.ndarray) -> None:
    if times.ndim != 1 or len(times) < 1:
        raise ValueError("times must be a 1-d array with at least one point")
    if not np.all(np.isfinite(times)):
        raise ValueError("times must be finite")
    if abs(times[0]) > 1e-12:
        raise ValueError(f"time grid must start at 0, got {times[0]!r}")
    if len(times) > 1:
        steps = np.diff(times)
        if steps.min() <= 0:
            raise ValueError("times must be strictly increasing")
        dt = (times[-1] - times[0]) / (len(times) - 1)
        # tolerance admits grids round-tripped through 9-digit CSV output
        if np.max(np.abs(steps - dt)) > 2e-8 * max(dt, abs(times[-1]), 1.0):
            raise ValueError("times must be uniformly spaced")


def erf(x):
    """Error function, elementwise; absolute error below 1e-12."""
    return scipy.special.erf(x)


def pdf_delta_e(delta_e, sigma_e: float):
    """Gaussian density of the field gradient, std sqrt(2) sigma_e.

    f(x) = exp(-x^2 / (4 sigma_e^2)) / (2 sigma_e sqrt(pi)).  sigma_e = 0 is
    a point mass handled by the callers, not a density; it is rejected here.
    """
    if not (math.isfinite(sigma_e) and sigma_e > 0):
        raise ValueError(f"sigma_e must be > 0, got {sigma_e!r}")
    x = np.asarray(delta_e, dtype=float)
    out = np.exp(-x * x / (4.0 * sigma_e * sigma_e)) / (2.0 * sigma_e * math.sqrt(math.pi))
    return float(out) if np.ndim(delta_e) == 0 else out


def pdf_exchange(j, j0i: float, sigma_ji: float):
    """Density of a coupling: Gaussian(j0i, sigma_ji) truncated to j >= 0.

    The normalization 2 / (1 + erf(j0i / (sigma sqrt(2)))) restores unit mass
    after discarding the negative tail; the density is 0 for j < 0.
    """
    if not (math.isfinite(sigma_ji) and sigma_ji > 0):
        raise ValueError(f"sigma_ji must be > 0, got {sigma_ji!r}")
    if not (math.isfinite(j0i) and j0i >= 0):
        raise ValueError(f"j0i must be >= 0, got {j0i!r}")
    x = np.asarray(j, dtype=float)
    norm = 2.0 / (1.0 + scipy.special.erf(j0i / (sigma_ji * math.sqrt(2.0))))
    gauss = np.exp(-((x - j0i) ** 2) / (2.0 * sigma_ji * sigma_ji)) / (sigma_ji * math.sqrt(2.0 * math.pi))
    out = np.where(x >= 0.0, norm * gauss, 0.0)
    return float(out) if np.ndim(j) == 0 else out


def sample_noise(rng, spec: NoiseSpec, size: Optional[int] = None):
    """Draw (j1, j2, delta_e) from the noise distributions.

    Couplings use rejection of negative draws, which samples the truncated
    Gaussian exactly (acceptance >= 1/2 for any j0i >= 0).  ``rng`` is a
    numpy Generator or a seed for ``numpy.random.default_rng``.  With
    ``size=None`` returns three floats, otherwise three arrays.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    n = 1 if size is None else int(size)
    if n < 1:
        raise ValueError(f"size must be >= 1, got {size!r}")

    def truncated(j0, sigma):
        if sigma == 0.0:
            return np.full(n, j0)
        out = rng.normal(j0, sigma, n)
        bad = out < 0.0
        while bad.any():
            out[bad] = rng.normal(j0, sigma, int(bad.sum()))
            bad = out < 0.0
        return out

    j1 = truncated(spec.j01, spec.sigma_j1)
    j2 = truncated(spec.j02, spec.sigma_j2)
    if spec.sigma_e == 0.0:
        delta_e = np.zeros(n)
    else:
        delta_e = rng.normal(0.0, math.sqrt(2.0) * spec.sigma_e, n)
    if size is None:
        return float(j1[0]), float(j2[0]), float(delta_e[0])
    return j1, j2, delta_e


def adaptive_quadrature_spec(
    noise: NoiseSpec,
    t_max: float,
    nodes_per_radian: float = 0.35,
    base: QuadratureSpec = QuadratureSpec(),
) -> QuadratureSpec:
    """Size quadrature node counts to the phase span of the integrand.

    The averaged trace sums cos(omega(x) t) whose gradient components are
    bounded by 1 in j0 units, so the phase accumulated across a dimension of
    range R is at most t_max * R.  Gauss-Legendre resolves such oscillations
    once nodes exceed about 0.3 per radian (measured cliff); 0.35 adds
    margin.  Gauss-Hermite would need O(phase^2) nodes, so a nonzero sigma_e
    switches the delta_e rule to pdf-weighted Legendre.
    """
    if not (math.isfinite(t_max) and t_max >= 0):
        raise ValueError(f"t_max must be finite and >= 0, got {t_max!r}")
    w = base.truncation_width
    n_de = base.n_hermite
    rule = base.delta_e_rule
    if noise.sigma_e > 0:
        span = 2.0 * w * math.sqrt(2.0) * noise.sigma_e
        n_de = max(base.n_hermite, math.ceil(nodes_per_radian * t_max * span))
        rule = "legendre"
    spans = []
    for j0, sigma in ((noise.j01, noise.sigma_j1), (noise.j02, noise.sigma_j2)):
        if sigma > 0:
            spans.append((j0 + w * sigma) - max(0.0, j0 - w * sigma))
    n_leg = base.n_legendre
    if spans:
        n_leg = max(base.n_legendre, math.ceil(nodes_per_radian * t_max * max(spans)))
    return QuadratureSpec(
        n_hermite=n_de, n_legendre=n_leg, truncation_width=w, delta_e_rule=rule
    )


def _nodes_delta_e(sigma_e: float, q: QuadratureSpec, sign: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and unit-mass weights for the delta_e dimension."""
    if sigma_e == 0.0:
        return np.zeros(1), np.ones(1)
    if q.delta_e_rule == "hermite":
        u, wu = roots_hermite(q.n_hermite)
        return sign * 2.0 * sigma_e * u, wu / math.sqrt(math.pi)
    std = math.sqrt(2.0) * sigma_e
    x, wx = np.polynomial.legendre.leggauss(q.n_hermite)
    half = q.truncation_width * std
    nodes = half * x
    weights = half * wx * pdf_delta_e(nodes, sigma_e)
    return sign * nodes, weights / weights.sum()


def _nodes_coupling(j0: float, sigma: float, q: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Pdf-weighted Gauss-Legendre nodes for one truncated coupling."""
    if sigma == 0.0:
        return np.full(1, j0), np.ones(1)
    lo = max(0.0, j0 - q.truncation_width * sigma)
    hi = j0 + q.truncation_width * sigma
    x, wx = np.polynomial.legendre.leggauss(q.n_legendre)
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * wx * pdf_exchange(nodes, j0, sigma)
    return nodes, weights / weights.sum()


def _tensor_average(
    p: ExchangeParams,
    spec: NoiseSpec,
    initial: str,
    times: np.ndarray,
    q: QuadratureSpec,
    sign: float,
    evaluator: Optional[str],
) -> tuple[np.ndarray, dict]:
    """Evaluate the tensor-quadrature average of the chosen probability."""
    x1, w1 = _nodes_coupling(spec.j01, spec.sigma_j1, q)
    x2, w2 = _nodes_coupling(spec.j02, spec.sigma_j2, q)
    xe, we = _nodes_delta_e(spec.sigma_e, q, sign)
    n_nodes = len(x1) * len(x2) * len(xe)
    n_times = len(times)
    if evaluator is None:
        evaluator = "binned" if (n_nodes * n_times > _DIRECT_LIMIT and n_times > 1) else "direct"

    if evaluator == "binned":
        # bound the frequency support from the node extremes
        d_lo = p.j_prime - 0.5 * (x1.max() + x2.max()) + xe.min()
        d_hi = p.j_prime - 0.5 * (x1.min() + x2.min()) + xe.max()
        d_max = max(abs(d_lo), abs(d_hi))
        c_max = (math.sqrt(3.0) / 4.0) * max(abs(x1.max() - x2.min()), abs(x2.max() - x1.min()))
        om_max = math.sqrt(d_max * d_max + 4.0 * c_max * c_max) * 1.01 + 1e-9
        n_bins = int(2 ** math.ceil(math.log2(max(4096.0, om_max * times[-1] / _BIN_PHASE_STEP))))
        d_om = om_max / n_bins
        mass = np.zeros(n_bins + 2)
    base = 0.0
    osc = np.zeros(n_times)
    # accumulate one j01-slab at a time to bound memory
    grid2, grid_e = np.meshgrid(x2, xe, indexing="ij")
    grid2 = grid2.ravel()
    grid_e = grid_e.ravel()
    w_slab = (w2[:, None] * we[None, :]).ravel()
    for i in range(len(x1)):
        omega, amp_zero, amp_sup = oscillation_terms(p.j_prime, x1[i], grid2, grid_e)
        weights = w1[i] * w_slab
        if initial == "zero":
            coef = 0.5 * weights * amp_zero
            base += float(weights.sum() - 0.5 * (weights * amp_zero).sum())
        else:
            coef = -0.25 * weights * amp_sup
            base += float(0.5 * weights.sum() + 0.25 * (weights * amp_sup).sum())
        # P = base + sum_k coef_k cos(omega_k t) with sin^2 rewritten via cos
        if evaluator == "binned":
            pos = omega / d_om
            idx = np.floor(pos).astype(np.int64)
            frac = pos - idx
            mass += np.bincount(idx, coef * (1.0 - frac), minlength=n_bins + 2)
            mass += np.bincount(idx + 1, coef * frac, minlength=n_bins + 2)
        else:
            chunk = max(1, _DIRECT_LIMIT // max(n_times, 1) // 8)
            for s in range(0, len(omega), chunk):
                sl = slice(s, s + chunk)
                osc += coef[sl] @ np.cos(np.outer(omega[sl], times))
    if evaluator == "binned":
        if n_times > 1:
            dt = (times[-1] - times[0]) / (n_times - 1)
            osc = np.real(
                scipy.signal.czt(
                    mass.astype(complex),
                    m=n_times,
                    w=np.exp(-1j * d_om * dt),
                    a=np.exp(1j * d_om * times[0]),
                )
            )
        else:
            osc = np.array([mass.sum() * math.cos(0.0)])
    values = base + osc
    meta = {
        "n_delta_e": len(xe),
        "n_j1": len(x1),
        "n_j2": len(x2),
        "n_nodes": n_nodes,
        "delta_e_rule": q.delta_e_rule if spec.sigma_e > 0 else "collapsed",
        "evaluator": evaluator,
    }
    return values, meta


def _clip_probabilities(values: np.ndarray) -> np.ndarray:
    if values.min() < -1e-6 or values.max() > 1.0 + 1e-6:
        raise ValueError(
            f"averaged probabilities left [0, 1] by more than 1e-6: "
            f"range [{values.min()!r}, {values.max()!r}]"
        )
    return np.clip(values, 0.0, 1.0)


def disorder_average_quadrature(
    p: ExchangeParams,
    spec: NoiseSpec,
    initial: str,
    times,
    q: Optional[QuadratureSpec] = None,
    check_convergence: bool = False,
    _evaluator: Optional[str] = None,
    _delta_e_sign: float = 1.0,
) -> ProbabilityTrace:
    """Disorder-averaged return probability by deterministic tensor quadrature.

    Gauss-Hermite in u = delta_e/(2 sigma_e) (or pdf-weighted Gauss-Legendre,
    see QuadratureSpec.delta_e_rule) is tensored with pdf-weighted
    Gauss-Legendre over [max(0, j0i - w sigma_ji), j0i + w sigma_ji] per
    coupling, each dimension's weights renormalized by its numerically
    integrated mass.  Zero-sigma dimensions collapse to a single node at the
    mean.  q=None sizes node counts adaptively for the grid's t_max.

    With check_convergence=True the average is recomputed with doubled node
    counts; if any point moves by more than 1e-5 the trace metadata carries
    quadrature_converged=False and a warning string.

    Parameters
    ----------
    p : ExchangeParams
    spec : NoiseSpec
    initial : {"zero", "superposition"}
    times : uniform ascending grid starting at 0, in hbar/j0
    q : QuadratureSpec, optional

    Returns
    -------
    ProbabilityTrace with method="quadrature".
    """
    times = np.asarray(times, dtype=float)
    _validate_times(times)
    if initial not in ("zero", "superposition"):
        raise ValueError(f"initial must be 'zero' or 'superposition', got {initial!r}")
    if q is None:
        q = adaptive_quadrature_spec(spec, float(times[-1]))
    values, meta = _tensor_average(p, spec, initial, times, q, _delta_e_sign, _evaluator)
    meta["quadrature_spec"] = q
    if check_convergence:
        doubled = QuadratureSpec(
            n_hermite=2 * q.n_hermite,
            n_legendre=2 * q.n_legendre,
            truncation_width=q.truncation_width,
            delta_e_rule=q.delta_e_rule,
        )
        values2, _ = _tensor_average(p, spec, initial, times, doubled, _delta_e_sign, _evaluator)
        change = float(np.max(np.abs(values2 - values)))
        meta["doubling_max_change"] = change
        meta["quadrature_converged"] = change <= 1e-5
        if change > 1e-5:
            meta["warning"] = f"doubling nodes moved a point by {change:.3e} (> 1e-5)"
    return ProbabilityTrace(
        times=times,
        values=_clip_probabilities(values),
        initial=initial,
        method="quadrature",
        params=p,
        noise=spec,
        metadata=meta,
    )


def disorder_average_mc(
    p: ExchangeParams,
    spec: NoiseSpec,
    initial: str,
    times,
    n_samples: int,
    seed,
) -> ProbabilityTrace:
    """Monte Carlo disorder average with per-point standard errors.

    Samples (j1, j2, delta_e) once and evaluates the closed-form probability
    at every time point; the standard error is the sample standard deviation
    over sqrt(n_samples).  Bit-reproducible for a given seed.
    """
    times = np.asarray(times, dtype=float)
    _validate_times(times)
    if initial not in ("zero", "superposition"):
        raise ValueError(f"initial must be 'zero' or 'superposition', got {initial!r}")
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples!r}")
    rng = np.random.default_rng(seed)
    j1, j2, delta_e = sample_noise(rng, spec, size=n_samples)
    omega, amp_zero, amp_sup = oscillation_terms(p.j_prime, j1, j2, delta_e)
    values = np.empty(len(times))
    errors = np.zeros(len(times))
    scale = 1.0 / math.sqrt(n_samples)
    for k, t in enumerate(times):
        s2 = np.sin(0.5 * omega * t) ** 2
        if initial == "zero":
            probs = 1.0 - amp_zero * s2
        else:
            probs = 0.5 * (1.0 + amp_sup * s2)
        values[k] = probs.mean()
        if n_samples > 1:
            errors[k] = probs.std(ddof=1) * scale
    return ProbabilityTrace(
        times=times,
        values=_clip_probabilities(values),
        initial=initial,
        method="monte-carlo",
        params=p,
        noise=spec,
        mc_std_errors=errors,
        metadata={"n_samples": n_samples, "seed": seed},
    )
