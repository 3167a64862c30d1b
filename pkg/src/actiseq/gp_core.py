"""Expression-tree genotype for threshold classifiers.

Trees are immutable once built: variation operators return new trees that
share untouched subtrees with their parents, so copies are cheap and
evaluation is safe to run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .kernels import (
    OP_ADD,
    OP_AQ,
    OP_CONST,
    OP_MUL,
    OP_NEG,
    OP_SUB,
    OP_VAR,
    eval_program,
)

ARITY = {OP_NEG: 1, OP_ADD: 2, OP_SUB: 2, OP_MUL: 2, OP_AQ: 2, OP_VAR: 0, OP_CONST: 0}
FUNCTION_OPS = (OP_NEG, OP_ADD, OP_SUB, OP_MUL, OP_AQ)

OP_TEXT = {OP_NEG: "neg", OP_ADD: "+", OP_SUB: "-", OP_MUL: "*", OP_AQ: "aq"}
TEXT_OP = {v: k for k, v in OP_TEXT.items()}
OP_JSON = {
    OP_NEG: "neg",
    OP_ADD: "add",
    OP_SUB: "sub",
    OP_MUL: "mul",
    OP_AQ: "aq",
    OP_VAR: "var",
    OP_CONST: "const",
}
JSON_OP = {v: k for k, v in OP_JSON.items()}

# clamp applied to overflowing intermediates so every response stays finite
HUGE = 1e300


@dataclass(frozen=True)
class Node:
    """One tree node; ``size`` and ``depth`` are derived and cached."""

    kind: int
    children: tuple["Node", ...] = ()
    index: int = -1
    value: float = 0.0
    size: int = field(init=False, compare=False, repr=False)
    depth: int = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ARITY:
            raise DataError(f"unknown node kind {self.kind}")
        if len(self.children) != ARITY[self.kind]:
            raise DataError(
                f"node kind {self.kind} takes {ARITY[self.kind]} children, "
                f"got {len(self.children)}"
            )
        if self.kind == OP_VAR and self.index < 0:
            raise DataError("feature reference needs a non-negative index")
        object.__setattr__(self, "size", 1 + sum(c.size for c in self.children))
        object.__setattr__(
            self, "depth", 1 + max((c.depth for c in self.children), default=0)
        )


def variable(index: int) -> Node:
    return Node(OP_VAR, index=index)


def constant(value: float) -> Node:
    return Node(OP_CONST, value=float(value))


def neg(a: Node) -> Node:
    return Node(OP_NEG, (a,))


def add(a: Node, b: Node) -> Node:
    return Node(OP_ADD, (a, b))


def sub(a: Node, b: Node) -> Node:
    return Node(OP_SUB, (a, b))


def mul(a: Node, b: Node) -> Node:
    return Node(OP_MUL, (a, b))


def aq(a: Node, b: Node) -> Node:
    """Analytic quotient a / sqrt(1 + b*b); division-safe for all b."""
    return Node(OP_AQ, (a, b))


class GpTree:
    """Immutable expression tree with a lazily compiled postfix program."""

    __slots__ = ("root", "_program")

    def __init__(self, root: Node):
        self.root = root
        self._program = None

    @property
    def node_count(self) -> int:
        return self.root.size

    @property
    def depth(self) -> int:
        return self.root.depth

    def program(self):
        """Postfix opcode/arg/value arrays plus the stack depth they need."""
        if self._program is None:
            n = self.root.size
            ops = np.empty(n, np.int64)
            args = np.full(n, -1, np.int64)
            vals = np.zeros(n)
            pos = 0
            need = 1
            sp = 0
            # iterative postorder emit
            stack = [(self.root, False)]
            while stack:
                node, emitted = stack.pop()
                if emitted:
                    ops[pos] = node.kind
                    if node.kind == OP_VAR:
                        args[pos] = node.index
                    elif node.kind == OP_CONST:
                        vals[pos] = node.value
                    pos += 1
                    arity = ARITY[node.kind]
                    sp += 1 - arity
                    if sp > need:
                        need = sp
                else:
                    stack.append((node, True))
                    for c in reversed(node.children):
                        stack.append((c, False))
            self._program = (ops, args, vals, need)
        return self._program

    def max_feature_index(self) -> int:
        args = self.program()[1]
        return int(args.max())

    def __eq__(self, other):
        return isinstance(other, GpTree) and self.root == other.root

    def __hash__(self):
        return hash(self.root)

    def __repr__(self):
        return f"GpTree({tree_to_text(self)})"


def evaluate_batch(tree: GpTree, x: np.ndarray) -> np.ndarray:
    """Tree responses for every row of a (n, d) feature matrix."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DataError("feature matrix must be 2-dimensional")
    ops, args, vals, need = tree.program()
    if tree.max_feature_index() >= x.shape[1]:
        raise DataError(
            f"tree references feature {tree.max_feature_index()} but data has "
            f"{x.shape[1]} features"
        )
    return eval_program(ops, args, vals, need, x, HUGE)


def evaluate_tree(tree: GpTree, x) -> float:
    """Tree response for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("expected a 1-dimensional feature vector")
    return float(evaluate_batch(tree, x[None, :])[0])


# ---------------------------------------------------------------------------
# random generation
# ---------------------------------------------------------------------------

def _random_leaf(rng, n_features: int, constants: bool) -> Node:
    n_terms = n_features + (1 if constants else 0)
    pick = int(rng.integers(n_terms))
    if pick < n_features:
        return variable(pick)
    return constant(rng.uniform(-1.0, 1.0))


def _random_function(rng) -> int:
    return FUNCTION_OPS[int(rng.integers(len(FUNCTION_OPS)))]


def generate_tree(
    max_depth: int,
    mode: str,
    rng: np.random.Generator,
    n_features: int,
    constants: bool = True,
) -> GpTree:
    """Random tree: ``full`` puts every leaf at max_depth, ``grow`` allows
    earlier leaves by drawing uniformly over the combined symbol set."""
    if max_depth < 1:
        raise ConfigError("max_depth must be >= 1")
    if mode not in ("full", "grow"):
        raise ConfigError(f"unknown generation mode {mode!r}")
    n_terms = n_features + (1 if constants else 0)
    n_symbols = n_terms + len(FUNCTION_OPS)

    def build(depth_left: int) -> Node:
        if depth_left == 1:
            return _random_leaf(rng, n_features, constants)
        if mode == "grow" and int(rng.integers(n_symbols)) < n_terms:
            return _random_leaf(rng, n_features, constants)
        op = _random_function(rng)
        kids = tuple(build(depth_left - 1) for _ in range(ARITY[op]))
        return Node(op, kids)

    return GpTree(build(max_depth))


def init_population(
    size: int,
    max_depth: int,
    rng: np.random.Generator,
    n_features: int,
    constants: bool = True,
) -> list[GpTree]:
    """Ramped half-and-half: floor(size/2) full trees then grow trees, with
    target depths cycling over 2..max_depth."""
    if size < 2:
        raise ConfigError("population size must be >= 2")
    if max_depth >= 2:
        ramp = list(range(2, max_depth + 1))
    else:
        ramp = [1]
    n_full = size // 2
    pop = []
    for i in range(n_full):
        pop.append(generate_tree(ramp[i % len(ramp)], "full", rng, n_features, constants))
    for i in range(size - n_full):
        pop.append(generate_tree(ramp[i % len(ramp)], "grow", rng, n_features, constants))
    return pop


# ---------------------------------------------------------------------------
# variation
# ---------------------------------------------------------------------------

def _subtree_at(node: Node, idx: int) -> Node:
    # preorder index: 0 is the node itself, children follow in order
    while idx:
        idx -= 1
        for c in node.children:
            if idx < c.size:
                node = c
                break
            idx -= c.size
    return node


def _replace_at(node: Node, idx: int, repl: Node) -> Node:
    path = []
    while idx:
        idx -= 1
        for ci, c in enumerate(node.children):
            if idx < c.size:
                path.append((node, ci))
                node = c
                break
            idx -= c.size
    out = repl
    for parent, ci in reversed(path):
        kids = list(parent.children)
        kids[ci] = out
        out = Node(parent.kind, tuple(kids), parent.index, parent.value)
    return out


def point_crossover(
    parent_a: GpTree,
    parent_b: GpTree,
    rng: np.random.Generator,
    max_depth: int | None = None,
) -> GpTree:
    """Replace a uniformly chosen subtree of a with a uniformly chosen
    subtree of b. With ``max_depth`` set, offspring deeper than the cap are
    discarded in favour of parent a."""
    ia = int(rng.integers(parent_a.node_count))
    ib = int(rng.integers(parent_b.node_count))
    graft = _subtree_at(parent_b.root, ib)
    child = GpTree(_replace_at(parent_a.root, ia, graft))
    if max_depth is not None and child.depth > max_depth:
        return GpTree(parent_a.root)
    return child


def point_mutation(
    parent: GpTree,
    subtree_max_depth: int,
    rng: np.random.Generator,
    n_features: int,
    constants: bool = True,
) -> GpTree:
    """Replace a uniformly chosen subtree with a fresh grow-mode tree."""
    if subtree_max_depth < 1:
        raise ConfigError("subtree_max_depth must be >= 1")
    idx = int(rng.integers(parent.node_count))
    repl = generate_tree(subtree_max_depth, "grow", rng, n_features, constants)
    return GpTree(_replace_at(parent.root, idx, repl.root))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def tree_to_text(tree: GpTree) -> str:
    """Prefix-notation text form, e.g. ``(* (+ x0 x2) x1)``."""

    def render(node: Node) -> str:
        if node.kind == OP_VAR:
            return f"x{node.index}"
        if node.kind == OP_CONST:
            return repr(node.value)
        inner = " ".join(render(c) for c in node.children)
        return f"({OP_TEXT[node.kind]} {inner})"

    return render(tree.root)


def tree_from_text(text: str) -> GpTree:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens:
        raise DataError("empty tree text")
    pos = 0

    def parse() -> Node:
        nonlocal pos
        if pos >= len(tokens):
            raise DataError("unexpected end of tree text")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            if pos >= len(tokens) or tokens[pos] not in TEXT_OP:
                raise DataError(f"unknown operator near position {pos}")
            op = TEXT_OP[tokens[pos]]
            pos += 1
            kids = tuple(parse() for _ in range(ARITY[op]))
            if pos >= len(tokens) or tokens[pos] != ")":
                raise DataError("missing closing parenthesis")
            pos += 1
            return Node(op, kids)
        if tok == ")":
            raise DataError("unexpected closing parenthesis")
        if tok.startswith("x") and tok[1:].isdigit():
            return variable(int(tok[1:]))
        try:
            return constant(float(tok))
        except ValueError:
            raise DataError(f"bad leaf token {tok!r}") from None

    root = parse()
    if pos != len(tokens):
        raise DataError("trailing tokens after tree text")
    return GpTree(root)


def tree_to_json(tree: GpTree) -> dict:
    def render(node: Node) -> dict:
        if node.kind == OP_VAR:
            return {"kind": "var", "index": node.index}
        if node.kind == OP_CONST:
            return {"kind": "const", "value": node.value}
        return {"kind": OP_JSON[node.kind], "children": [render(c) for c in node.children]}

    return render(tree.root)


def tree_from_json(obj: dict) -> GpTree:
    def parse(o) -> Node:
        if not isinstance(o, dict) or "kind" not in o:
            raise DataError("tree json nodes need a 'kind' field")
        kind = o["kind"]
        if kind == "var":
            return variable(int(o["index"]))
        if kind == "const":
            return constant(float(o["value"]))
        if kind not in JSON_OP:
            raise DataError(f"unknown tree json kind {kind!r}")
        op = JSON_OP[kind]
        kids = o.get("children", [])
        if len(kids) != ARITY[op]:
            raise DataError(f"node {kind!r} takes {ARITY[op]} children")
        return Node(op, tuple(parse(c) for c in kids))

    return GpTree(parse(obj))
