"""Exact moment operators on tensor powers, spanning sets, Weingarten maps.

The moment operator of a probability density ``nu`` is
``T(nu) = int rho(g) nu(g) dg`` on the tensor representation
``V^{(x)n} (x) (V*)^{(x)n'}``.  Multi-indices are ordered V-slots first:
``(i_1..i_n; i'_1..i'_{n'})``, so the matrix entry of ``T`` is the moment

    T[(i;i'), (j;j')] = E[ g_{i_1 j_1} ... g_{i_n j_n}
                           g^{-1}_{j'_1 i'_1} ... g^{-1}_{j'_{n'} i'_{n'}} ].

Everything reduces to the spectral theory of the tensor Casimir: the Haar
moment is the orthogonal projector onto its null space, the Brownian moment
at time t is ``exp(t/2 C)``, and the Weingarten map is the pseudoinverse of
the Gram matrix of a spanning set of invariant tensors.

The Wilson action admits no exact closed form here; for that measure the
expectation is delegated to the Monte-Carlo estimator in ``sampling``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .catalog import RepData, split_casimir
from .loops import Loop, LoopPair, LoopSum, loops_to_tensor
from .tensor import eig_hermitian, pseudoinverse

__all__ = [
    "DEFAULT_BUDGET",
    "BudgetError",
    "SpectralGapError",
    "MeasureSpec",
    "MomentOperator",
    "SpanningSet",
    "WeingartenMap",
    "tensor_casimir",
    "haar_moment",
    "brownian_moment",
    "moment_operator",
    "spanning_set",
    "weingarten",
    "expect_product",
    "null_cutoff",
]

DEFAULT_BUDGET = 4096


class BudgetError(RuntimeError):
    """Tensor-power dimension exceeds the configured memory budget."""

    def __init__(self, required: int, budget: int):
        super().__init__(
            f"tensor representation needs dimension {required}, over the budget {budget}; "
            f"raise the budget to proceed"
        )
        self.required = required
        self.budget = budget


class SpectralGapError(RuntimeError):
    """The null-space cutoff cannot be separated from nonzero Casimir eigenvalues."""


@dataclass(frozen=True)
class MeasureSpec:
    """Haar | Brownian(t) | Wilson(beta, plaquettes)."""

    kind: str
    t: float = 0.0
    beta: float = 0.0
    plaquettes: tuple[Loop, ...] = ()

    def __post_init__(self):
        if self.kind not in ("haar", "brownian", "wilson"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "brownian" and not self.t > 0:
            raise ValueError("brownian measure needs t > 0")
        if self.kind == "wilson":
            reps = {p.rep.spec for p in self.plaquettes}
            if len(reps) > 1:
                raise ValueError("wilson plaquettes must share one representation")
            for p in self.plaquettes:
                if p.n_slots != 1:
                    raise ValueError("wilson plaquettes must be linear loops")

    @classmethod
    def haar(cls) -> "MeasureSpec":
        return cls("haar")

    @classmethod
    def brownian(cls, t: float) -> "MeasureSpec":
        return cls("brownian", t=float(t))

    @classmethod
    def wilson(cls, beta: float, plaquettes: Sequence[Loop]) -> "MeasureSpec":
        return cls("wilson", beta=float(beta), plaquettes=tuple(plaquettes))

    @classmethod
    def parse(cls, text: str, plaquettes: Sequence[Loop] = ()) -> "MeasureSpec":
        """Parse CLI measure strings: ``haar``, ``brownian:t=1.5``, ``wilson:beta=0.1``."""
        head, _, tail = text.partition(":")
        head = head.strip().lower()
        params = {}
        if tail:
            for item in tail.split(","):
                key, _, val = item.partition("=")
                params[key.strip()] = float(val)
        if head == "haar":
            return cls.haar()
        if head == "brownian":
            if "t" not in params:
                raise ValueError("brownian measure needs t, e.g. brownian:t=1.5")
            return cls.brownian(params["t"])
        if head == "wilson":
            if "beta" not in params:
                raise ValueError("wilson measure needs beta, e.g. wilson:beta=0.1")
            return cls.wilson(params["beta"], plaquettes)
        raise ValueError(f"unknown measure {text!r}")


@dataclass(frozen=True)
class MomentOperator:
    """T(nu) on the tensor representation, with the Casimir spectrum cached."""

    rep: RepData
    n: int
    nprime: int
    kind: str
    matrix: np.ndarray
    spectrum: np.ndarray
    t: float = 0.0

    @property
    def rank(self) -> int:
        cutoff = null_cutoff(self.rep, self.n, self.nprime)
        return int(np.sum(np.abs(self.spectrum) < cutoff))

    def as_tensor(self) -> np.ndarray:
        d, m = self.rep.dim, self.n + self.nprime
        return self.matrix.reshape((d,) * (2 * m))


def null_cutoff(rep: RepData, n: int, nprime: int) -> float:
    """Threshold below which a tensor-Casimir eigenvalue counts as zero."""
    return 1e-8 * max(1.0, abs(rep.lam) * (n + nprime))


def _check_budget(rep: RepData, n: int, nprime: int, budget: int) -> int:
    if n + nprime < 1:
        raise ValueError("need n + n' >= 1")
    required = rep.dim ** (n + nprime)
    if required > budget:
        raise BudgetError(required, budget)
    return required


def tensor_casimir(rep: RepData, n: int, nprime: int,
                   budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Casimir of ``rho^{(x)n,(x)n'}`` as a ``(D, D)`` Hermitian matrix.

    Assembled from the split Casimir K of the base representation:
    ``(n+n') lambda`` on the diagonal, ``+2 K`` across pairs of like slots,
    ``-2 K`` (index-twisted) across mixed slot pairs.  Its eigenspaces are
    the isotypic components of the tensor representation and all eigenvalues
    are non-positive.
    """
    dim_v = _check_budget(rep, n, nprime, budget)
    d, m = rep.dim, n + nprime
    k = split_casimir(rep).k
    # every catalog completeness relation is a real tensor; assembling in
    # float64 halves memory traffic and enables the real-symmetric eigensolver
    if np.max(np.abs(k.imag)) <= 1e-14 * max(1.0, np.max(np.abs(k.real))):
        k = np.ascontiguousarray(k.real)
        dtype = np.float64
    else:
        dtype = np.complex128
    kernel_vv = k                          # K[i_r, j_r, i_s, j_s]
    kernel_dd = k.transpose(1, 0, 3, 2)    # K[j'_r, i'_r, j'_s, i'_s]
    kernel_vd = k.transpose(0, 1, 3, 2)    # K[i_r, j_r, j'_s, i'_s]

    eye = np.eye(d, dtype=dtype)
    total = (m * rep.lam) * np.eye(dim_v, dtype=dtype).reshape((d,) * (2 * m))

    def pair_term(kernel: np.ndarray, p: int, q: int) -> np.ndarray:
        args: list = [kernel, [p, m + p, q, m + q]]
        for s in range(m):
            if s not in (p, q):
                args.extend([eye, [s, m + s]])
        args.append(list(range(2 * m)))
        return np.einsum(*args)

    for r, s in itertools.combinations(range(n), 2):
        total = total + 2.0 * pair_term(kernel_vv, r, s)
    for r, s in itertools.combinations(range(nprime), 2):
        total = total + 2.0 * pair_term(kernel_dd, n + r, n + s)
    for r in range(n):
        for s in range(nprime):
            total = total - 2.0 * pair_term(kernel_vd, r, n + s)

    c = total.reshape(dim_v, dim_v).astype(np.complex128)
    herm_defect = np.linalg.norm(c - c.conj().T)
    if herm_defect > 1e-11 * max(1.0, np.linalg.norm(c)):
        raise RuntimeError(f"tensor Casimir not Hermitian (defect {herm_defect:.2e})")
    return c


_SPECTRAL_CACHE: dict = {}


def _spectral(rep: RepData, n: int, nprime: int, budget: int):
    key = (rep, n, nprime)
    if key in _SPECTRAL_CACHE:
        return _SPECTRAL_CACHE[key]
    _check_budget(rep, n, nprime, budget)
    c = tensor_casimir(rep, n, nprime, budget)
    c = 0.5 * (c + c.conj().T)
    if np.max(np.abs(c.imag)) <= 1e-13 * max(1.0, np.max(np.abs(c.real))):
        w, u = np.linalg.eigh(c.real)  # real symmetric path, much faster
        u = u.astype(np.complex128)
    else:
        w, u = eig_hermitian(c)
    if w.size and w[-1] > 1e-8:
        raise RuntimeError(f"tensor Casimir has a positive eigenvalue {w[-1]:.3e}")
    _SPECTRAL_CACHE[key] = (w, u)
    return w, u


def haar_moment(rep: RepData, n: int, nprime: int,
                budget: int = DEFAULT_BUDGET) -> MomentOperator:
    """Projector onto the invariants, via the tensor-Casimir null space."""
    w, u = _spectral(rep, n, nprime, budget)
    cutoff = null_cutoff(rep, n, nprime)
    null = np.abs(w) < cutoff
    nonzero = np.abs(w[~null])
    if nonzero.size and nonzero.min() < 10.0 * cutoff:
        raise SpectralGapError(
            f"smallest nonzero |eigenvalue| {nonzero.min():.3e} is within 10x of the "
            f"null cutoff {cutoff:.3e}; tighten the cutoff before trusting the projector"
        )
    basis = u[:, null]
    matrix = basis @ basis.conj().T
    return MomentOperator(rep, n, nprime, "haar", matrix, w)


def brownian_moment(rep: RepData, n: int, nprime: int, t: float,
                    budget: int = DEFAULT_BUDGET) -> MomentOperator:
    """Heat-semigroup moment ``exp(t/2 C)`` on the tensor representation."""
    if not t > 0:
        raise ValueError("brownian moment needs t > 0")
    w, u = _spectral(rep, n, nprime, budget)
    matrix = (u * np.exp(0.5 * t * w)) @ u.conj().T
    return MomentOperator(rep, n, nprime, "brownian", matrix, w, t=t)


_MOMENT_CACHE: dict = {}


def moment_operator(rep: RepData, n: int, nprime: int, measure: MeasureSpec,
                    budget: int = DEFAULT_BUDGET) -> MomentOperator:
    """Cached exact moment operator for Haar or Brownian measures."""
    if measure.kind == "wilson":
        raise ValueError("no exact moment operator for the Wilson action")
    key = (rep, n, nprime, measure.kind, measure.t, budget)
    if key not in _MOMENT_CACHE:
        if measure.kind == "haar":
            _MOMENT_CACHE[key] = haar_moment(rep, n, nprime, budget)
        else:
            _MOMENT_CACHE[key] = brownian_moment(rep, n, nprime, measure.t, budget)
    return _MOMENT_CACHE[key]


# ---------------------------------------------------------------------------
# spanning sets of invariants and the Weingarten map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpanningSet:
    """Images of abstract labels under a map tau into the invariant tensors.

    ``vectors[k]`` is the flattened tensor tau(labels[k]); every vector is
    annihilated by the tensor Casimir.
    """

    rep: RepData
    n: int
    nprime: int
    source: str
    labels: tuple
    vectors: np.ndarray


def _perfect_matchings(items: tuple[int, ...]):
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for idx in range(len(rest)):
        partner = rest[idx]
        remaining = rest[:idx] + rest[idx + 1:]
        for tail in _perfect_matchings(remaining):
            yield ((first, partner),) + tail


def _permutation_vectors(d: int, n: int) -> tuple[tuple, np.ndarray]:
    labels = tuple(itertools.permutations(range(n)))
    eye = np.eye(d, dtype=np.complex128)
    vecs = []
    for sigma in labels:
        args: list = []
        for k in range(n):
            args.extend([eye, [sigma[k], n + k]])
        args.append(list(range(2 * n)))
        vecs.append(np.einsum(*args).reshape(-1))
    return labels, np.array(vecs)


def _pairing_vectors(rep: RepData, n: int, nprime: int) -> tuple[tuple, np.ndarray]:
    m = n + nprime
    if m % 2:
        raise ValueError("pairings need an even total number of slots")
    d = rep.dim
    if rep.spec.family == "sp":
        form = rep.constants["J"]
    else:
        form = np.eye(d, dtype=np.complex128)
    eye = np.eye(d, dtype=np.complex128)
    labels = tuple(_perfect_matchings(tuple(range(m))))
    vecs = []
    for matching in labels:
        args: list = []
        for p, q in matching:
            like = (p < n) == (q < n)  # V-V or dual-dual pairs use the form
            args.extend([form if like else eye, [p, q]])
        args.append(list(range(m)))
        vecs.append(np.einsum(*args).reshape(-1))
    return labels, np.array(vecs)


def spanning_set(rep: RepData, n: int, nprime: int, source: str,
                 budget: int = DEFAULT_BUDGET) -> SpanningSet:
    """Spanning vectors of (a subspace of) the invariants of the tensor power.

    Sources: ``permutations`` (U(N), n = n'), ``pairings`` (SO/Sp),
    ``g2u`` (G2, (n, n') = (2, 0)), and the generic ``nullspace``.
    """
    source = source.lower()
    _check_budget(rep, n, nprime, budget)
    if source == "permutations":
        if rep.spec.family != "u" or n != nprime or n < 1:
            raise ValueError("permutations source needs the U family and n = n' >= 1")
        labels, vecs = _permutation_vectors(rep.dim, n)
    elif source == "pairings":
        if rep.spec.family not in ("so", "sp"):
            raise ValueError("pairings source supports the SO and Sp families")
        labels, vecs = _pairing_vectors(rep, n, nprime)
    elif source == "g2u":
        if rep.spec.family != "g2" or (n, nprime) != (2, 0):
            raise ValueError("g2u source is the (2,0) invariant of G2")
        labels = ("u",)
        vecs = np.eye(7, dtype=np.complex128).reshape(1, -1)
    elif source == "nullspace":
        w, u = _spectral(rep, n, nprime, budget)
        null = np.abs(w) < null_cutoff(rep, n, nprime)
        vecs = u[:, null].T.copy()
        labels = tuple(f"null{k}" for k in range(vecs.shape[0]))
    else:
        raise ValueError(f"unknown spanning-set source {source!r}")

    w, u = _spectral(rep, n, nprime, budget)
    for k, v in enumerate(vecs):
        # |C v| computed in the eigenbasis of the cached spectral data
        if np.linalg.norm(w * (u.conj().T @ v)) > 1e-9 * np.linalg.norm(v):
            raise RuntimeError(f"spanning vector {labels[k]!r} is not invariant")
    return SpanningSet(rep, n, nprime, source, labels, vecs)


@dataclass(frozen=True)
class WeingartenMap:
    """Gram matrix of a spanning set and its Moore-Penrose pseudoinverse."""

    spanning: SpanningSet
    gram: np.ndarray
    wg: np.ndarray

    def moment_matrix(self) -> np.ndarray:
        """``tau o Wg o tau*``; equals the Haar moment when the set spans."""
        v = self.spanning.vectors
        return v.T @ self.wg @ np.conj(v)


def weingarten(ss: SpanningSet, rel_cutoff: float = 1e-8) -> WeingartenMap:
    if ss.vectors.shape[0] == 0:
        raise ValueError("empty spanning set")
    gram = np.conj(ss.vectors) @ ss.vectors.T
    wg = pseudoinverse(gram, rel_cutoff)
    return WeingartenMap(ss, gram, wg)


# ---------------------------------------------------------------------------
# expectations of products of loops
# ---------------------------------------------------------------------------


ProductItem = Union[Loop, LoopSum]


def _expand_items(items: Sequence[ProductItem]) -> list[list[Loop]]:
    """Multilinear expansion of a product of loops and loop sums."""
    combos: list[list[Loop]] = [[]]
    for item in items:
        if isinstance(item, Loop):
            for combo in combos:
                combo.append(item)
            continue
        if not isinstance(item, LoopSum):
            raise TypeError(f"expected Loop or LoopSum, got {type(item).__name__}")
        new: list[list[Loop]] = []
        for term in item.terms:
            extension = [term.left, term.right] if isinstance(term, LoopPair) else [term]
            for combo in combos:
                new.append(combo + extension)
        combos = new
    return combos


def _expect_flat(flat: list[Loop], measure: MeasureSpec, budget: int) -> complex:
    """Exact expectation of a plain product of loops (Haar or Brownian)."""
    specs = {w.rep.spec for w in flat}
    if len(specs) == 1:
        rep = flat[0].rep
        a, pattern = loops_to_tensor(flat)
        n = sum(1 for s in pattern if s == 1)
        nprime = len(pattern) - n
        op = moment_operator(rep, n, nprime, measure, budget)
        t = op.as_tensor()
        m = n + nprime
        # A axes per + slot s: (i_s, j_s); per - slot s: (i'_s, j'_s).
        subs_a: list[int] = []
        for s in range(n):
            subs_a.extend([s, m + s])
        for s in range(nprime):
            subs_a.extend([n + s, m + n + s])
        return complex(np.einsum(a, subs_a, t, list(range(2 * m)), []))
    if all(spec.family == "u1power" for spec in specs):
        k_tot = 0
        coeff = 1.0 + 0.0j
        for w in flat:
            k_tot += w.rep.spec.n * sum(w.signs)
            coeff *= w.scale
            for c, _ in w.factors:
                coeff *= c[0, 0]
        if measure.kind == "haar":
            return coeff if k_tot == 0 else 0.0 + 0.0j
        return coeff * np.exp(-0.5 * measure.t * k_tot ** 2)
    raise ValueError("loops must share one representation (or all be U(1) characters)")


def expect_product(items: Sequence[ProductItem], measure: MeasureSpec,
                   budget: int = DEFAULT_BUDGET, samples: int | None = None,
                   rng=None, steps: int | None = None):
    """Expectation of a product of loops (and loop sums) under a measure.

    Haar and Brownian are exact, by contraction against the moment operator
    (or by character algebra when the loops are U(1) characters in mixed
    powers).  The Wilson action has no exact route and is estimated by
    self-normalized importance sampling; it returns an `MCEstimate` and
    requires ``samples`` and ``rng``.
    """
    if measure.kind == "wilson":
        from .sampling import RngSpec, mc_expect

        if samples is None:
            raise ValueError("the Wilson measure needs an explicit sample count")
        if rng is None:
            rng = RngSpec(0)
        return mc_expect(list(items), measure, samples, rng)
    total = 0.0 + 0.0j
    for flat in _expand_items(items):
        if flat:
            total += _expect_flat(flat, measure, budget)
    return total
