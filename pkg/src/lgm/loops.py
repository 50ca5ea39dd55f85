"""Generalized Wilson loops, their merging and twisting, and loop flattening.

A loop is the function ``g -> scale * tr(c_1 rho(g^{s_1}) ... c_r rho(g^{s_r}))``
given by an alternating word of coefficient matrices ``c_i`` and signed group
slots ``s_i = +-1``.  Slot positions are 1-based.

Merging and twisting insert an orthonormal Lie-algebra generator ``xi^a``
next to a distinguished slot and sum over ``a``.  In terms of the factor
word the insertion is purely local:

* a ``+`` slot at position j carries ``... c_j g ...``; inserting ``xi``
  after the ``g`` multiplies the cyclically following coefficient from the
  left, ``c_{j+1} -> xi c_{j+1}``;
* a ``-`` slot carries ``... c_j g^{-1} ...``; inserting ``xi`` before the
  ``g^{-1}`` multiplies the slot's own coefficient from the right,
  ``c_j -> c_j xi``.

The sign of a merge/twist term is the product of the two slot signs.  This
reproduces the four-case tables for merging and twisting; the coordinate
evaluators at the bottom of the module implement those tables directly by
contraction with a split-Casimir tensor and exist so tests can check the two
routes against each other.

Group elements are unitary matrices in the group's own realization (1x1 for
the U(1) characters); the inverse is taken as the conjugate transpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .catalog import GroupSpec, RepData, build_representation, split_casimir

__all__ = [
    "Loop",
    "LoopPair",
    "LoopSum",
    "loop",
    "linear_loop",
    "insert_generator",
    "merge_at",
    "total_merge",
    "twist_at",
    "total_twist",
    "laplacian",
    "conjugate_loop",
    "merge_at_coordinate",
    "twist_at_coordinate",
    "loops_to_tensor",
    "slot_matrices",
    "loop_to_json",
    "loop_from_json",
    "loopsum_to_json",
    "loopsum_from_json",
]


@dataclass(frozen=True)
class Loop:
    """A generalized Wilson loop ``scale * tr(prod_i c_i rho(g^{s_i}))``."""

    rep: RepData
    factors: tuple[tuple[np.ndarray, int], ...]
    scale: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a loop needs at least one factor")
        d = self.rep.dim
        frozen = []
        for coeff, sign in self.factors:
            c = np.array(coeff, dtype=np.complex128)
            if c.shape != (d, d):
                raise ValueError(f"coefficient shape {c.shape} does not match rep dim {d}")
            if sign not in (1, -1):
                raise ValueError(f"slot sign must be +1 or -1, got {sign}")
            c.setflags(write=False)
            frozen.append((c, int(sign)))
        object.__setattr__(self, "factors", tuple(frozen))
        object.__setattr__(self, "scale", complex(self.scale))

    @property
    def n_slots(self) -> int:
        return len(self.factors)

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(s for _, s in self.factors)

    def scaled(self, c: complex) -> "Loop":
        return Loop(self.rep, self.factors, self.scale * c)

    def rotated(self, k: int) -> "Loop":
        """Cyclic rotation of the factor word (same function by trace cyclicity)."""
        k %= self.n_slots
        return Loop(self.rep, self.factors[k:] + self.factors[:k], self.scale)

    def evaluate(self, g: np.ndarray) -> complex:
        return complex(self.evaluate_batch(np.asarray(g, dtype=np.complex128)[None])[0])

    def evaluate_batch(self, gs: np.ndarray) -> np.ndarray:
        """Evaluate on a stack ``(B, m, m)`` of group elements; returns ``(B,)``."""
        gs = np.asarray(gs, dtype=np.complex128)
        plus = self.rep.rho(gs, 1)
        minus = self.rep.rho(gs, -1)
        acc = None
        for coeff, sign in self.factors:
            step = coeff @ (plus if sign == 1 else minus)
            acc = step if acc is None else acc @ step
        return self.scale * np.trace(acc, axis1=-2, axis2=-1)


@dataclass(frozen=True)
class LoopPair:
    """A product of two loops, kept split: ``g -> left(g) * right(g)``."""

    left: Loop
    right: Loop

    def evaluate(self, g: np.ndarray) -> complex:
        return self.left.evaluate(g) * self.right.evaluate(g)

    def evaluate_batch(self, gs: np.ndarray) -> np.ndarray:
        return self.left.evaluate_batch(gs) * self.right.evaluate_batch(gs)


Term = Union[Loop, LoopPair]


@dataclass(frozen=True)
class LoopSum:
    """A formal finite sum of loops and split loop products."""

    terms: tuple[Term, ...] = ()

    def evaluate(self, g: np.ndarray) -> complex:
        return complex(sum((t.evaluate(g) for t in self.terms), 0.0 + 0.0j))

    def evaluate_batch(self, gs: np.ndarray) -> np.ndarray:
        gs = np.asarray(gs, dtype=np.complex128)
        out = np.zeros(gs.shape[:-2], dtype=np.complex128)
        for t in self.terms:
            out = out + t.evaluate_batch(gs)
        return out

    def __add__(self, other: "LoopSum") -> "LoopSum":
        return LoopSum(self.terms + other.terms)


def loop(rep: RepData, coeffs: Sequence[np.ndarray], signs: Sequence[int],
         scale: complex = 1.0) -> Loop:
    if len(coeffs) != len(signs):
        raise ValueError("coeffs and signs must have equal length")
    return Loop(rep, tuple(zip(coeffs, signs)), scale)


def linear_loop(rep: RepData, coeff: np.ndarray, sign: int = 1, scale: complex = 1.0) -> Loop:
    return Loop(rep, ((coeff, sign),), scale)


def _compatible(w1: Loop, w2: Loop) -> None:
    if w1.rep is w2.rep or w1.rep.spec == w2.rep.spec:
        return
    if w1.rep.spec.family == "u1power" and w2.rep.spec.family == "u1power":
        return  # characters of the one group U(1) share the algebra basis
    raise ValueError(
        f"loops live in different representations: {w1.rep.spec.label()} vs {w2.rep.spec.label()}"
    )


def _check_slot(w: Loop, j: int) -> None:
    if not 1 <= j <= w.n_slots:
        raise ValueError(f"slot position {j} out of range 1..{w.n_slots}")


def insert_generator(w: Loop, j: int, x: np.ndarray) -> Loop:
    """Insert the algebra element ``x`` at slot ``j`` (after ``g``, before ``g^{-1}``)."""
    _check_slot(w, j)
    jj = j - 1
    coeffs = [c for c, _ in w.factors]
    signs = list(w.signs)
    if signs[jj] == 1:
        nxt = (jj + 1) % w.n_slots
        coeffs[nxt] = x @ coeffs[nxt]
    else:
        coeffs[jj] = coeffs[jj] @ x
    return loop(w.rep, coeffs, signs, w.scale)


def merge_at(w1: Loop, j: int, w2: Loop, j2: int) -> LoopSum:
    """Merging of two loops at slots ``j`` of ``w1`` and ``j2`` of ``w2``.

    Returns the generator sum ``sign * sum_a (w1 with xi^a at j) x (w2 with
    xi^a at j2)`` as a LoopSum of split pair terms, with ``sign`` the product
    of the two slot signs.
    """
    _compatible(w1, w2)
    _check_slot(w1, j)
    _check_slot(w2, j2)
    sgn = w1.signs[j - 1] * w2.signs[j2 - 1]
    terms = []
    for a in range(w1.rep.algebra_dim):
        left = insert_generator(w1, j, w1.rep.generators[a]).scaled(sgn)
        right = insert_generator(w2, j2, w2.rep.generators[a])
        terms.append(LoopPair(left, right))
    return LoopSum(tuple(terms))


def total_merge(w1: Loop, w2: Loop) -> LoopSum:
    """Merging summed over all slot pairs; equals ``<dW1, dW2>`` pointwise."""
    out = LoopSum()
    for j in range(1, w1.n_slots + 1):
        for j2 in range(1, w2.n_slots + 1):
            out = out + merge_at(w1, j, w2, j2)
    return out


def twist_at(w: Loop, j: int, j2: int) -> LoopSum:
    """Twisting of a loop at two distinct slots of the same trace."""
    _check_slot(w, j)
    _check_slot(w, j2)
    if j == j2:
        raise ValueError("twisting requires two distinct slot positions")
    sgn = w.signs[j - 1] * w.signs[j2 - 1]
    terms = []
    for a in range(w.rep.algebra_dim):
        xi = w.rep.generators[a]
        terms.append(insert_generator(insert_generator(w, j, xi), j2, xi).scaled(sgn))
    return LoopSum(tuple(terms))


def total_twist(w: Loop) -> LoopSum:
    """Twisting summed over ordered pairs of distinct slots."""
    out = LoopSum()
    for j in range(1, w.n_slots + 1):
        for j2 in range(1, w.n_slots + 1):
            if j != j2:
                out = out + twist_at(w, j, j2)
    return out


def laplacian(w: Loop) -> LoopSum:
    """Laplace-Beltrami operator on a loop: ``lambda * n * w`` plus the total twist."""
    head = LoopSum((w.scaled(w.rep.lam * w.n_slots),))
    return head + total_twist(w)


def conjugate_loop(w: Loop) -> Loop:
    """The loop computing the complex conjugate, ``g -> conj(w(g))``.

    Transposing the trace reverses the word and daggers its pieces:
    coefficients become ``c_k^dagger`` in reverse order and every slot sign
    flips (the sign sequence also shifts by one step relative to the
    coefficients).
    """
    r = w.n_slots
    coeffs = [w.factors[(r - 1 - k) % r][0].conj().T for k in range(r)]
    signs = [-w.factors[(r - 2 - k) % r][1] for k in range(r)]
    return loop(w.rep, coeffs, signs, np.conj(w.scale))


# ---------------------------------------------------------------------------
# coordinate-form evaluation driven by a split-Casimir tensor
# ---------------------------------------------------------------------------


def _isolate_one(w: Loop, j: int, g: np.ndarray) -> tuple[np.ndarray, int]:
    """Rewrite ``w`` as ``tr(C g^{s_j})`` at the element ``g``.

    Returns the (g-dependent) matrix ``C`` with the loop's scale folded in,
    and the slot sign.
    """
    jj = j - 1
    rot = w.factors[jj + 1:] + w.factors[: jj + 1]
    acc = np.eye(w.rep.dim, dtype=np.complex128) * w.scale
    for coeff, sign in rot[:-1]:
        acc = acc @ coeff @ w.rep.rho(g, sign)
    return acc @ rot[-1][0], rot[-1][1]


def _isolate_two(w: Loop, j: int, j2: int, g: np.ndarray):
    """Rewrite ``w`` as ``tr(C g^{s_j} D g^{s_{j2}})`` at the element ``g``."""
    jj, jj2 = j - 1, j2 - 1
    rot = w.factors[jj2 + 1:] + w.factors[: jj2 + 1]
    pos = (jj - jj2 - 1) % w.n_slots  # index of slot j inside the rotated word
    acc = np.eye(w.rep.dim, dtype=np.complex128) * w.scale
    for coeff, sign in rot[:pos]:
        acc = acc @ coeff @ w.rep.rho(g, sign)
    c = acc @ rot[pos][0]
    acc = np.eye(w.rep.dim, dtype=np.complex128)
    for coeff, sign in rot[pos + 1: -1]:
        acc = acc @ coeff @ w.rep.rho(g, sign)
    d = acc @ rot[-1][0]
    return c, rot[pos][1], d, rot[-1][1]


def _k_tensor(rep: RepData, k: np.ndarray | None) -> np.ndarray:
    return split_casimir(rep).k if k is None else np.asarray(k, dtype=np.complex128)


def merge_at_coordinate(w1: Loop, j: int, w2: Loop, j2: int, g: np.ndarray,
                        k: np.ndarray | None = None) -> complex:
    """Evaluate the merge at ``g`` by contracting a split-Casimir tensor.

    ``k`` defaults to the generator sum; passing the closed completeness
    form evaluates the merge without touching any generator.
    """
    if w1.rep.spec != w2.rep.spec:
        raise ValueError("coordinate-form merging needs a common representation")
    kt = _k_tensor(w1.rep, k)
    c, s1 = _isolate_one(w1, j, g)
    d, s2 = _isolate_one(w2, j2, g)
    gp, gm = w1.rep.rho(g, 1), w1.rep.rho(g, -1)
    if (s1, s2) == (1, 1):
        val = np.einsum("ijkl,js,si,lt,tk->", kt, c, gp, d, gp)
    elif (s1, s2) == (1, -1):
        val = -np.einsum("ijkl,js,si,tk,lt->", kt, c, gp, d, gm)
    elif (s1, s2) == (-1, 1):
        val = -np.einsum("ijkl,si,js,lt,tk->", kt, c, gm, d, gp)
    else:
        val = np.einsum("ijkl,si,js,tk,lt->", kt, c, gm, d, gm)
    return complex(val)


def twist_at_coordinate(w: Loop, j: int, j2: int, g: np.ndarray,
                        k: np.ndarray | None = None) -> complex:
    """Evaluate the twist at ``g`` by contracting a split-Casimir tensor."""
    if j == j2:
        raise ValueError("twisting requires two distinct slot positions")
    kt = _k_tensor(w.rep, k)
    c, s1, d, s2 = _isolate_two(w, j, j2, g)
    gp, gm = w.rep.rho(g, 1), w.rep.rho(g, -1)
    if (s1, s2) == (1, 1):
        val = np.einsum("ijkl,ls,si,jt,tk->", kt, c, gp, d, gp)
    elif (s1, s2) == (1, -1):
        val = -np.einsum("ijkl,ts,si,jk,lt->", kt, c, gp, d, gm)
    elif (s1, s2) == (-1, 1):
        val = -np.einsum("ijkl,li,js,st,tk->", kt, c, gm, d, gp)
    else:
        val = np.einsum("ijkl,ti,js,sk,lt->", kt, c, gm, d, gm)
    return complex(val)


# ---------------------------------------------------------------------------
# flattening products of loops into a coefficient tensor
# ---------------------------------------------------------------------------


def loops_to_tensor(loops: Iterable[Loop]) -> tuple[np.ndarray, tuple[int, ...]]:
    """Flatten a product of loops into a coefficient tensor.

    Returns ``(a, pattern)`` where ``pattern`` lists the slot signs in the
    canonical order "all + slots first (in order of appearance), then all -
    slots", and ``a`` carries one ``(d, d)`` axis pair per slot in that
    order.  For a + slot the pair is ``(i, j)`` contracting against
    ``rho(g)_{ij}``; for a - slot it is ``(i', j')`` contracting against
    ``rho(g^{-1})_{j' i'}``.  Contracting ``a`` with the slot matrices of
    ``slot_matrices`` reproduces the product of loop values.
    """
    loops = list(loops)
    if not loops:
        raise ValueError("need at least one loop")
    rep = loops[0].rep
    for w in loops[1:]:
        if w.rep.spec != rep.spec:
            raise ValueError("loops_to_tensor needs a common representation")

    acc = np.array(1.0 + 0.0j)
    all_signs: list[int] = []
    for w in loops:
        r = w.n_slots
        operands = []
        subscripts = []
        for k2 in range(r):
            operands.append(w.factors[k2][0])
            subscripts.append([2 * k2, 2 * k2 + 1])  # (a_k, b_k)
        out: list[int] = []
        for k2 in range(r):
            b_k = 2 * k2 + 1
            a_next = 2 * ((k2 + 1) % r)
            if w.factors[k2][1] == 1:
                out.extend([b_k, a_next])
            else:
                out.extend([a_next, b_k])
        args: list = []
        for op, sub in zip(operands, subscripts):
            args.extend([op, sub])
        args.append(out)
        t = np.einsum(*args) * w.scale
        acc = np.multiply.outer(acc, t)
        all_signs.extend(w.signs)

    plus = [s for s, sg in enumerate(all_signs) if sg == 1]
    minus = [s for s, sg in enumerate(all_signs) if sg == -1]
    perm: list[int] = []
    for s in plus + minus:
        perm.extend([2 * s, 2 * s + 1])
    a = np.transpose(acc, perm) if perm else acc
    pattern = tuple([1] * len(plus) + [-1] * len(minus))
    return np.ascontiguousarray(a), pattern


def slot_matrices(rep: RepData, g: np.ndarray, pattern: Sequence[int]) -> list[np.ndarray]:
    """Per-slot matrices whose full contraction with the coefficient tensor
    reproduces the loop product at ``g``."""
    gp = rep.rho(g, 1)
    gm_t = rep.rho(g, -1).T  # [i', j'] entry equals rho(g^{-1})_{j' i'}
    return [gp if s == 1 else gm_t for s in pattern]


def contract_with_slots(a: np.ndarray, mats: Sequence[np.ndarray]) -> complex:
    args: list = []
    for s, m in enumerate(mats):
        args.extend([m, [2 * s, 2 * s + 1]])
    args.extend([a, list(range(2 * len(mats)))])
    args.append([])
    return complex(np.einsum(*args))


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------


def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m)]


def _matrix_from_json(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows],
                    dtype=np.complex128)


def loop_to_json(w: Loop) -> dict:
    return {
        "rep": {"family": w.rep.spec.family, "n": w.rep.spec.n},
        "scale": [float(w.scale.real), float(w.scale.imag)],
        "factors": [
            {"coeff": _matrix_to_json(c), "sign": s} for c, s in w.factors
        ],
    }


def loop_from_json(doc: dict) -> Loop:
    rep = build_representation(GroupSpec(doc["rep"]["family"], int(doc["rep"].get("n", 0))))
    scale = complex(*doc.get("scale", [1.0, 0.0]))
    coeffs = [_matrix_from_json(f["coeff"]) for f in doc["factors"]]
    signs = [int(f["sign"]) for f in doc["factors"]]
    return loop(rep, coeffs, signs, scale)


def loopsum_to_json(s: LoopSum) -> list:
    out = []
    for t in s.terms:
        if isinstance(t, LoopPair):
            out.append({"pair": [loop_to_json(t.left), loop_to_json(t.right)]})
        else:
            out.append(loop_to_json(t))
    return out


def loopsum_from_json(docs: list) -> LoopSum:
    terms: list[Term] = []
    for doc in docs:
        if "pair" in doc:
            terms.append(LoopPair(loop_from_json(doc["pair"][0]), loop_from_json(doc["pair"][1])))
        else:
            terms.append(loop_from_json(doc))
    return LoopSum(tuple(terms))
