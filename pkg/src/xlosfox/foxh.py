"""Multivariate Fox H-function by QMC integration over truncated contours.

Parameter conventions follow the MATLAB ``mfoxh`` routine: with s the vector
of integration variables, the kernel is

    (2 pi i)^-M  prod Gamma(1 - a_j + alpha_j . s)          outer_upper_num
               / prod Gamma(a'_j - alpha'_j . s)            outer_upper_den
               / prod Gamma(1 - b_j + beta_j . s)           outer_lower_den
          * prod_i [ prod Gamma(1 - c + gamma s_i)          upper_num
                     prod Gamma(d - delta s_i)              lower_num
                   / prod Gamma(c' - gamma' s_i)            upper_den
                   / prod Gamma(1 - d' + delta' s_i) ]      lower_den
          * prod_i z_i^{s_i}

and the H-function is its integral over the product of vertical lines
Re(s_i) = c_i, truncated at |Im(s_i)| <= W.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qmc import apply_shift, default_point_budget, halton_block, random_shift
from .qmc import DEFAULT_LEAP, DEFAULT_SKIP
from .special_fn import GammaTerm, PoleError, POLE_TOL, log_gamma_product

__all__ = [
    "Pair",
    "VariableBlock",
    "FoxHParams",
    "ContourSpec",
    "EvalOptions",
    "EvalResult",
    "ContourError",
    "EvaluationError",
    "ParamFileError",
    "integrand",
    "evaluate",
    "eval_batch",
    "params_from_dict",
    "params_to_dict",
    "load_params",
    "dump_params",
    "worker_count",
    "DEFAULT_HEIGHT",
]

DEFAULT_HEIGHT = 10.0
BLOCK_SIZE = 8192
# cap on the (batch x block) work array, in elements
_MAX_WORK = 1 << 21
_LOG_2PI_I = complex(math.log(2.0 * math.pi), math.pi / 2.0)


class ContourError(ValueError):
    """The integration segments pass through a pole of the kernel."""


class EvaluationError(ArithmeticError):
    """The integrand was singular or non-finite at a sample point."""

    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message if point is None else f"{message} at s = {point}")


class ParamFileError(ValueError):
    def __init__(self, field_name, message):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


def worker_count():
    """Threads used for block evaluation; XLOS_WORKERS overrides all cores."""
    env = os.environ.get("XLOS_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Pair:
    """A parameter pair (offset; coeffs) as written in the H-function symbol."""

    offset: float
    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in np.atleast_1d(self.coeffs)))


@dataclass(frozen=True)
class VariableBlock:
    upper_num: tuple[Pair, ...] = ()
    upper_den: tuple[Pair, ...] = ()
    lower_num: tuple[Pair, ...] = ()
    lower_den: tuple[Pair, ...] = ()

    def __post_init__(self):
        for name in ("upper_num", "upper_den", "lower_num", "lower_den"):
            pairs = tuple(_as_pair(p) for p in getattr(self, name))
            for p in pairs:
                if len(p.coeffs) != 1:
                    raise ValueError(f"{name}: per-variable coefficients must be scalars")
            object.__setattr__(self, name, pairs)

    @property
    def size(self):
        return len(self.upper_num) + len(self.upper_den) + len(self.lower_num) + len(self.lower_den)


def _as_pair(p):
    if isinstance(p, Pair):
        return p
    if isinstance(p, dict):
        return Pair(p["offset"], p["coeffs"])
    offset, coeffs = p
    return Pair(offset, coeffs)


@dataclass(frozen=True)
class FoxHParams:
    z: tuple[float, ...]
    outer_upper_num: tuple[Pair, ...] = ()
    outer_upper_den: tuple[Pair, ...] = ()
    outer_lower_den: tuple[Pair, ...] = ()
    per_variable: tuple[VariableBlock, ...] = ()

    def __post_init__(self):
        z = tuple(float(v) for v in np.atleast_1d(self.z))
        object.__setattr__(self, "z", z)
        dim = len(z)
        if dim < 1:
            raise ValueError("at least one variable is required")
        if not all(v > 0 and math.isfinite(v) for v in z):
            raise ValueError(f"arguments z must be positive reals, got {z}")
        for name in ("outer_upper_num", "outer_upper_den", "outer_lower_den"):
            pairs = tuple(_as_pair(p) for p in getattr(self, name))
            for p in pairs:
                if len(p.coeffs) != dim:
                    raise ValueError(f"{name}: expected {dim} coefficients, got {len(p.coeffs)}")
            object.__setattr__(self, name, pairs)
        blocks = tuple(b if isinstance(b, VariableBlock) else VariableBlock(**b)
                       for b in self.per_variable)
        if not blocks:
            blocks = tuple(VariableBlock() for _ in range(dim))
        if len(blocks) != dim:
            raise ValueError(f"per_variable has {len(blocks)} blocks for dimension {dim}")
        object.__setattr__(self, "per_variable", blocks)
        if not self.gamma_terms():
            raise ValueError("degenerate H-function: no gamma factors")

    @property
    def dim(self):
        return len(self.z)

    def with_z(self, z):
        return FoxHParams(tuple(z), self.outer_upper_num, self.outer_upper_den,
                          self.outer_lower_den, self.per_variable)

    def gamma_terms(self):
        """The z-independent gamma factors as GammaTerm objects."""
        dim = len(self.z)
        terms = []
        for p in self.outer_upper_num:
            terms.append(GammaTerm(1.0 - p.offset, p.coeffs, 1))
        for p in self.outer_upper_den:
            terms.append(GammaTerm(p.offset, tuple(-c for c in p.coeffs), -1))
        for p in self.outer_lower_den:
            terms.append(GammaTerm(1.0 - p.offset, p.coeffs, -1))
        for i, blk in enumerate(self.per_variable):
            def unit(c):
                v = [0.0] * dim
                v[i] = c
                return tuple(v)
            for p in blk.upper_num:
                terms.append(GammaTerm(1.0 - p.offset, unit(p.coeffs[0]), 1))
            for p in blk.lower_num:
                terms.append(GammaTerm(p.offset, unit(-p.coeffs[0]), 1))
            for p in blk.upper_den:
                terms.append(GammaTerm(p.offset, unit(-p.coeffs[0]), -1))
            for p in blk.lower_den:
                terms.append(GammaTerm(1.0 - p.offset, unit(p.coeffs[0]), -1))
        return terms


@dataclass(frozen=True)
class ContourSpec:
    """Vertical segments c_i - iW .. c_i + iW."""

    abscissa: tuple[float, ...]
    half_height: float = DEFAULT_HEIGHT

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.abscissa))
        object.__setattr__(self, "abscissa", c)
        object.__setattr__(self, "half_height", float(self.half_height))
        if not self.half_height > 0:
            raise ValueError("half_height must be positive")
        if not all(math.isfinite(v) for v in c):
            raise ValueError("contour abscissas must be finite")

    @property
    def dim(self):
        return len(self.abscissa)

    @property
    def lower(self):
        return np.array(self.abscissa) - 1j * self.half_height

    @property
    def upper(self):
        return np.array(self.abscissa) + 1j * self.half_height


@dataclass(frozen=True)
class EvalOptions:
    """QMC settings. ``points=None`` selects the default budget for the dimension.

    With ``replicates == 1`` the plain Halton set is used; with more, each
    replicate gets its own seed-derived random shift.
    """

    points: int | None = None
    replicates: int = 1
    seed: int = 0
    skip: int = DEFAULT_SKIP
    leap: int = DEFAULT_LEAP
    workers: int | None = None

    def __post_init__(self):
        if self.points is not None and self.points < 1:
            raise ValueError("points must be positive")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    def budget(self, dim):
        return default_point_budget(dim) if self.points is None else int(self.points)


@dataclass(frozen=True)
class EvalResult:
    estimate: complex
    stderr: float
    points_used: int
    replicates: tuple[complex, ...] = field(default=(), repr=False)


def integrand(params: FoxHParams, s):
    """Kernel value(s) at s, shape (M,) or (n, M).

    Raises PoleError at a numerator pole and EvaluationError when the
    exponentiated value is not finite.
    """
    s = np.asarray(s, dtype=complex)
    if s.shape[-1] != params.dim:
        raise ValueError(f"s must have {params.dim} components")
    log_val = log_gamma_product(params.gamma_terms(), s) - params.dim * _LOG_2PI_I
    for m, zm in enumerate(params.z):
        log_val = log_val + s[..., m] * math.log(zm)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.exp(log_val)
    if not np.all(np.isfinite(val)):
        raise EvaluationError("non-finite integrand value")
    return val


def _check_contour(terms, contour):
    c = np.array(contour.abscissa)
    for t in terms:
        if t.sign < 0:
            continue
        re = t.offset + float(np.dot(t.coeffs, c))
        k = round(re)
        if k <= 0 and abs(re - k) < POLE_TOL:
            raise ContourError(
                f"contour Re(s) = {contour.abscissa} puts Gamma({t.offset:g} + {t.coeffs}.s) "
                f"on its pole at {k}")


class _Kernel:
    """Shared per-block work for a fixed gamma structure and contour."""

    def __init__(self, params, contour, lnz, options):
        if contour.dim != params.dim:
            raise ValueError(f"contour has {contour.dim} variables, kernel has {params.dim}")
        self.terms = params.gamma_terms()
        _check_contour(self.terms, contour)
        self.dim = params.dim
        self.lower = contour.lower
        self.extent = contour.upper - contour.lower
        self.volume = complex(np.prod(self.extent))
        self.options = options
        self.n_points = options.budget(self.dim)
        # per-dimension unique log-arguments and the index of each batch entry
        self.ulnz = []
        self.index = []
        for m in range(self.dim):
            vals, inv = np.unique(lnz[:, m], return_inverse=True)
            self.ulnz.append(vals)
            self.index.append(inv.reshape(-1))
        self.batch = lnz.shape[0]

    def block_sums(self, start, shift):
        count = min(BLOCK_SIZE, self.n_points - start)
        u = halton_block(self.dim, start, count, self.options.skip, self.options.leap)
        if shift is not None:
            u = apply_shift(u, shift)
        s = self.lower + self.extent * u
        try:
            log_g = log_gamma_product(self.terms, s) - self.dim * _LOG_2PI_I
        except PoleError as exc:
            bad = _locate_pole(self.terms, s)
            raise EvaluationError("integrand pole", bad) from exc
        with np.errstate(over="ignore", invalid="ignore"):
            a = np.exp(log_g)
            # z^s factors, one row per distinct value of log z_m
            powers = [np.exp(self.ulnz[m][:, None] * s[None, :, m]) for m in range(self.dim)]
        out = np.empty(self.batch, dtype=complex)
        step = max(1, _MAX_WORK // count)
        for b0 in range(0, self.batch, step):
            sl = slice(b0, min(self.batch, b0 + step))
            with np.errstate(over="ignore", invalid="ignore"):
                work = a[None, :] * powers[0][self.index[0][sl]]
                for m in range(1, self.dim):
                    work *= powers[m][self.index[m][sl]]
            if not np.all(np.isfinite(work)):
                row, col = np.argwhere(~np.isfinite(work))[0]
                raise EvaluationError("non-finite integrand value", tuple(s[col]))
            out[sl] = work.sum(axis=1)
        return out

    def run(self, shift, workers):
        starts = range(0, self.n_points, BLOCK_SIZE)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                sums = list(pool.map(lambda st: self.block_sums(st, shift), starts))
        else:
            sums = [self.block_sums(st, shift) for st in starts]
        # fixed reduction tree: pairwise over blocks, per batch entry
        total = np.ascontiguousarray(np.stack(sums).T).sum(axis=1)
        return self.volume * total / self.n_points


def _locate_pole(terms, s):
    for row in s:
        try:
            log_gamma_product(terms, row[None, :])
        except PoleError:
            return tuple(row)
    return None


def _replicate_shifts(dim, options):
    if options.replicates == 1:
        return [None]
    children = np.random.SeedSequence(options.seed).spawn(options.replicates)
    return [random_shift(dim, child) for child in children]


def _summarize(values, n_points):
    values = np.asarray(values)
    r = len(values)
    est = complex(values.mean())
    if r > 1:
        var = values.real.var(ddof=1) + values.imag.var(ddof=1)
        stderr = math.sqrt(var / r)
    else:
        stderr = 0.0
    return EvalResult(est, stderr, n_points * r, tuple(complex(v) for v in values))


def eval_batch(params_template: FoxHParams, contour: ContourSpec, z_list: Sequence,
               options: EvalOptions = EvalOptions()):
    """Evaluate the kernel of ``params_template`` at every argument in z_list.

    The gamma products are computed once per QMC point and shared; only the
    z^s factor changes between entries. Results match per-argument
    ``evaluate`` calls.
    """
    z_arr = np.atleast_2d(np.asarray(z_list, dtype=float))
    if z_arr.shape[1] != params_template.dim:
        raise ValueError(f"arguments must have {params_template.dim} components")
    if not np.all(z_arr > 0) or not np.all(np.isfinite(z_arr)):
        raise ValueError("arguments z must be positive and finite")
    kernel = _Kernel(params_template, contour, np.log(z_arr), options)
    workers = options.workers or worker_count()
    reps = np.array([kernel.run(shift, workers)
                     for shift in _replicate_shifts(params_template.dim, options)])
    return [_summarize(reps[:, k], kernel.n_points) for k in range(z_arr.shape[0])]


def evaluate(params: FoxHParams, contour: ContourSpec, options: EvalOptions = EvalOptions()):
    """H-function value: volume times the mean kernel value over the QMC set."""
    return eval_batch(params, contour, [params.z], options)[0]


# -- parameter files -------------------------------------------------------

def _pairs_from(data, key, dim=None):
    raw = data.get(key, [])
    if not isinstance(raw, list):
        raise ParamFileError(key, "expected a list of {offset, coeffs}")
    out = []
    for j, item in enumerate(raw):
        where = f"{key}[{j}]"
        if not isinstance(item, dict) or "offset" not in item or "coeffs" not in item:
            raise ParamFileError(where, "expected an object with 'offset' and 'coeffs'")
        coeffs = item["coeffs"]
        if not isinstance(coeffs, list):
            coeffs = [coeffs]
        if dim is not None and len(coeffs) != dim:
            raise ParamFileError(where, f"expected {dim} coefficients, got {len(coeffs)}")
        try:
            out.append(Pair(float(item["offset"]), tuple(float(c) for c in coeffs)))
        except (TypeError, ValueError) as exc:
            raise ParamFileError(where, str(exc)) from None
    return tuple(out)


def params_from_dict(data):
    """Build (FoxHParams, ContourSpec or None) from the JSON document layout."""
    if not isinstance(data, dict):
        raise ParamFileError("<root>", "expected an object")
    if "dim" not in data:
        raise ParamFileError("dim", "missing")
    dim = data["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ParamFileError("dim", "must be a positive integer")
    if "z" not in data:
        raise ParamFileError("z", "missing")
    z = data["z"]
    if not isinstance(z, list) or len(z) != dim:
        raise ParamFileError("z", f"expected a list of {dim} numbers")
    if not all(isinstance(v, (int, float)) and v > 0 for v in z):
        raise ParamFileError("z", "arguments must be positive reals")
    blocks_raw = data.get("per_variable", [])
    if not isinstance(blocks_raw, list) or (blocks_raw and len(blocks_raw) != dim):
        raise ParamFileError("per_variable", f"expected {dim} blocks")
    blocks = []
    for i, blk in enumerate(blocks_raw):
        if not isinstance(blk, dict):
            raise ParamFileError(f"per_variable[{i}]", "expected an object")
        unknown = set(blk) - {"upper_num", "upper_den", "lower_num", "lower_den"}
        if unknown:
            raise ParamFileError(f"per_variable[{i}]", f"unknown groups {sorted(unknown)}")
        blocks.append(VariableBlock(**{g: _pairs_from(blk, g, 1) for g in
                                       ("upper_num", "upper_den", "lower_num", "lower_den")}))
    try:
        params = FoxHParams(
            tuple(float(v) for v in z),
            _pairs_from(data, "outer_upper_num", dim),
            _pairs_from(data, "outer_upper_den", dim),
            _pairs_from(data, "outer_lower_den", dim),
            tuple(blocks),
        )
    except ParamFileError:
        raise
    except ValueError as exc:
        raise ParamFileError("<params>", str(exc)) from None
    contour = None
    if data.get("contour") is not None:
        raw = data["contour"]
        if not isinstance(raw, dict) or "abscissa" not in raw:
            raise ParamFileError("contour", "expected {abscissa, half_height}")
        if len(raw["abscissa"]) != dim:
            raise ParamFileError("contour.abscissa", f"expected {dim} values")
        try:
            contour = ContourSpec(tuple(raw["abscissa"]), raw.get("half_height", DEFAULT_HEIGHT))
        except ValueError as exc:
            raise ParamFileError("contour", str(exc)) from None
    return params, contour


def params_to_dict(params: FoxHParams, contour: ContourSpec | None = None):
    def pairs(ps):
        return [{"offset": p.offset, "coeffs": list(p.coeffs)} for p in ps]

    data = {
        "dim": params.dim,
        "z": list(params.z),
        "outer_upper_num": pairs(params.outer_upper_num),
        "outer_upper_den": pairs(params.outer_upper_den),
        "outer_lower_den": pairs(params.outer_lower_den),
        "per_variable": [
            {g: pairs(getattr(b, g)) for g in ("upper_num", "upper_den", "lower_num", "lower_den")}
            for b in params.per_variable
        ],
    }
    if contour is not None:
        data["contour"] = {"abscissa": list(contour.abscissa), "half_height": contour.half_height}
    return data


def load_params(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParamFileError("<json>", str(exc)) from None
    return params_from_dict(data)


def dump_params(params, contour=None, path=None):
    text = json.dumps(params_to_dict(params, contour), indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
