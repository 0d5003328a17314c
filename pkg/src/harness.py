"""
DynSC - Replay Harness
Replays an operation stream against one of three engines (the dynamic data
structures, recompute-from-scratch, or a periodically rebuilt static
sparsifier), optionally diffs every answer against the exact oracle, and
writes one CSV row per operation plus a summary row. Also hosts the
experiments behind the scaling trends: walk loads on path-augmented
expanders, steps to reach distinct edges, and sampling error versus rho.
"""
import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple
import logging

import networkx as nx
import numpy as np

from apps import DynamicER, DynamicSolver
from config import (
    MAX_DEGREE, ORACLE_MAX_N, PROJ_BUDGET_SCALE, SPARSIFIER, SPARSIFY_EPS, app_constants, walk_constants,
)
from exact_oracle import exact_energy, exact_er, lnorm, solve_grounded, solve_lap
from generators import from_networkx, gen_path_augmented_expander, read_demand
from graph_core import DynSCError, GraphError, MultiGraph, read_graph
from random_streams import HARNESS, generator
from schur_dynamic import DynamicSC
from sparsify import static_sparsify
from walk_engine import simulate_until_distinct, steps_to_distinct_edges

logger = logging.getLogger(__name__)

CSV_VERSION = "# dynsc-csv v1"
CSV_COLUMNS = ["op", "args", "answer", "exact", "rel_err", "pass", "micros", "ops_since_rebuild"]
MODES = ("er", "solver", "energy")
ALGORITHMS = ("dynamic", "recompute", "sparsifier-only")

# op code -> accepted argument counts
OP_ARITY = {"I": (2, 3), "D": (2,), "Q": (2,), "T": (1,), "C": (4,), "X": (1,), "EN": (0,)}


class StreamFormatError(DynSCError):
    """Malformed line in an operation stream."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Op:
    code: str
    args: Tuple[float, ...]
    lineno: int

    @property
    def text_args(self) -> str:
        return " ".join(f"{a:g}" if isinstance(a, float) else str(a) for a in self.args)


def parse_stream(lines: Iterable[str]) -> List[Op]:
    ops = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split()
        code = parts[0].upper()
        arity = OP_ARITY.get(code)
        if arity is None:
            raise StreamFormatError(f"unknown operation {parts[0]!r}", lineno)
        if len(parts) - 1 not in arity:
            raise StreamFormatError(f"{code} expects {' or '.join(map(str, arity))} arguments, got {len(parts) - 1}",
                                    lineno)
        try:
            if code == "I":
                args = (int(parts[1]), int(parts[2]), float(parts[3]) if len(parts) == 4 else 1.0)
            elif code == "C":
                args = (int(parts[1]), float(parts[2]), int(parts[3]), float(parts[4]))
            else:
                args = tuple(int(p) for p in parts[1:])
        except ValueError as e:
            raise StreamFormatError(f"bad number in {line!r}: {e}", lineno) from None
        ops.append(Op(code, args, lineno))
    return ops


def read_stream(path: str) -> List[Op]:
    with open(path, 'r', encoding='utf-8') as f:
        return parse_stream(f)


@dataclass
class RunConfig:
    graph: str
    stream: str
    mode: str = "er"
    algo: str = "dynamic"
    beta: Optional[float] = None
    epsilon: float = 0.5
    c_rho: Optional[float] = None
    seed: int = 0
    oracle: bool = False
    out: Optional[str] = None
    demand: Optional[str] = None
    sparsifier: str = SPARSIFIER
    presparsify: bool = False
    max_degree: int = MAX_DEGREE
    budget_scale: float = PROJ_BUDGET_SCALE
    min_pass_rate: float = 0.9

    def validate(self) -> Tuple[bool, List[str]]:
        issues = []
        if self.mode not in MODES:
            issues.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.algo not in ALGORITHMS:
            issues.append(f"algo must be one of {ALGORITHMS}, got {self.algo!r}")
        if not (0 < self.epsilon < 1):
            issues.append(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.beta is not None and not (0 < self.beta < 1):
            issues.append(f"beta must lie in (0, 1), got {self.beta}")
        if self.c_rho is not None and self.c_rho <= 0:
            issues.append(f"c_rho must be positive, got {self.c_rho}")
        if not (0 <= self.min_pass_rate <= 1):
            issues.append(f"min_pass_rate must lie in [0, 1], got {self.min_pass_rate}")
        return len(issues) == 0, issues

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown run config keys: {sorted(unknown)}")
        return cls(**data)


# engines


class Engine:
    """Common surface of the replay engines; `b` is only used in solver/energy modes."""
    rebuilds = 0

    def insert(self, u: int, v: int, w: float): ...

    def delete(self, u: int, v: int): ...

    def terminal(self, u: int): ...

    def change(self, u: int, bu: float, v: int, bv: float): ...

    def er(self, s: int, t: int) -> float: ...

    def potential_difference(self, u: int) -> float: ...

    def energy(self) -> float: ...

    @property
    def ops_since_rebuild(self) -> int:
        return 0


def _component_root(g: MultiGraph, u: int) -> int:
    _, labels = g.components()
    return int(np.nonzero(labels == labels[u])[0][0])


class DynamicEngine(Engine):
    def __init__(self, config: RunConfig, g: MultiGraph, b: Optional[np.ndarray]):
        constants = app_constants()
        if config.c_rho is not None:
            constants = constants.with_overrides(c_rho=config.c_rho)
        if config.mode == "er":
            self.app = DynamicER(g, config.epsilon, beta=config.beta, seed=config.seed, constants=constants,
                                 sparsifier=config.sparsifier, presparsify=config.presparsify)
        else:
            self.app = DynamicSolver(g, b, config.epsilon, beta=config.beta, seed=config.seed,
                                     constants=constants, max_degree=config.max_degree,
                                     budget_scale=config.budget_scale, sparsifier=config.sparsifier)

    @property
    def rebuilds(self) -> int:
        return self.app.rebuilds

    @property
    def ops_since_rebuild(self) -> int:
        return self.app.ops_since_rebuild

    def insert(self, u, v, w):
        self.app.insert(u, v, w)

    def delete(self, u, v):
        self.app.delete(u, v)

    def terminal(self, u):
        self.app.add_terminal(u)

    def change(self, u, bu, v, bv):
        self.app.change(u, bu, v, bv)

    def er(self, s, t):
        return self.app.er_query(s, t)

    def potential_difference(self, u):
        return self.app.potential_difference(u, _component_root(self.app.g, u))

    def energy(self):
        return self.app.energy_query()


class RecomputeEngine(Engine):
    """Exact dense answers recomputed from the current graph for every query."""

    def __init__(self, config: RunConfig, g: MultiGraph, b: Optional[np.ndarray]):
        self.g = g
        self.b = None if b is None else b.copy()

    def insert(self, u, v, w):
        self.g.insert_edge(u, v, w)

    def delete(self, u, v):
        edges = self.g.edges_between(u, v)
        if not edges:
            raise GraphError(f"no edge between {u} and {v}")
        self.g.delete_edge(edges[0])

    def change(self, u, bu, v, bv):
        self.b[u] = bu
        self.b[v] = bv

    def _solve(self) -> np.ndarray:
        return solve_lap(self.g.laplacian(), self.b, 1e-9)

    def er(self, s, t):
        return exact_er(self.g.laplacian(), s, t)

    def potential_difference(self, u):
        x = self._solve()
        return float(x[u] - x[_component_root(self.g, u)])

    def energy(self):
        return float(self.b @ self._solve())


class SparsifierOnlyEngine(RecomputeEngine):
    """Static leverage-score sparsifier, rebuilt from scratch whenever the graph has changed."""

    def __init__(self, config: RunConfig, g: MultiGraph, b: Optional[np.ndarray]):
        super().__init__(config, g, b)
        self.seed = config.seed
        self.rebuilds = 0
        self._sparse: Optional[MultiGraph] = None
        self._since = 0

    def insert(self, u, v, w):
        super().insert(u, v, w)
        self._sparse = None

    def delete(self, u, v):
        super().delete(u, v)
        self._sparse = None

    @property
    def ops_since_rebuild(self) -> int:
        return self._since

    def _laplacian(self) -> np.ndarray:
        if self._sparse is None:
            self._sparse = static_sparsify(self.g, SPARSIFY_EPS, generator(self.seed, HARNESS, self.rebuilds))
            self.rebuilds += 1
            self._since = 0
        self._since += 1
        return self._sparse.laplacian()

    def _solve(self) -> np.ndarray:
        return solve_lap(self._laplacian(), self.b, 1e-9)

    def er(self, s, t):
        return exact_er(self._laplacian(), s, t)


ENGINES = {"dynamic": DynamicEngine, "recompute": RecomputeEngine, "sparsifier-only": SparsifierOnlyEngine}


class Oracle:
    """Exact answers on a shadow copy of the graph and demand."""

    def __init__(self, g: MultiGraph, b: Optional[np.ndarray]):
        self.g = g.copy()
        self.b = None if b is None else b.copy()

    def apply(self, op: Op):
        if op.code == "I":
            self.g.insert_edge(*op.args)
        elif op.code == "D":
            self.g.delete_edge(self.g.edges_between(*op.args)[0])
        elif op.code == "C":
            u, bu, v, bv = op.args
            self.b[u] = bu
            self.b[v] = bv

    def answer(self, op: Op, approx: float) -> Tuple[float, float]:
        """(exact answer, relative error of `approx`)."""
        L = self.g.laplacian()
        if op.code == "Q":
            exact = exact_er(L, *op.args)
            scale = abs(exact)
        elif op.code == "EN":
            exact = exact_energy(L, self.b)
            scale = abs(exact)
        else:
            u = op.args[0]
            root = _component_root(self.g, u)
            x = solve_grounded(L, self.b)
            exact = float(x[u] - x[root])
            # |x(u) - x(r)| <= ||x||_L sqrt(ER(u, r))
            scale = max(abs(exact), lnorm(L, x) * math.sqrt(max(exact_er(L, u, root), 0.0)))
        if math.isinf(exact) or math.isinf(approx):
            return exact, (0.0 if exact == approx else math.inf)
        if scale == 0:
            return exact, (0.0 if abs(approx) < 1e-9 else math.inf)
        return exact, abs(approx - exact) / scale


@dataclass
class RunResult:
    rows: List[Dict[str, Any]]
    csv_text: str
    ops: int
    queries: int
    checked: int
    passed: int
    has_nan: bool
    total_micros: int
    rebuilds: int
    exit_code: int
    max_rel_err: float = 0.0
    errors: List[str] = field(default_factory=list)

    @property
    def pass_rate(self) -> Optional[float]:
        return self.passed / self.checked if self.checked else None


def _format(value: Optional[float]) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return f"{value:.12g}"


def write_csv(rows: Sequence[Dict[str, Any]], fp: TextIO):
    fp.write(CSV_VERSION + "\n")
    writer = csv.DictWriter(fp, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in CSV_COLUMNS})


def load_inputs(config: RunConfig) -> Tuple[MultiGraph, List[Op], Optional[np.ndarray]]:
    g = read_graph(config.graph)
    ops = read_stream(config.stream)
    b = None
    if config.mode != "er":
        b = read_demand(config.demand, g.n) if config.demand else np.zeros(g.n)
    return g, ops, b


def replay(config: RunConfig, g: MultiGraph, ops: Sequence[Op], b: Optional[np.ndarray] = None) -> RunResult:
    """Replay `ops` against the configured engine; g and b are not modified."""
    ok, issues = config.validate()
    if not ok:
        raise ValueError("; ".join(issues))
    if config.oracle and g.n > ORACLE_MAX_N:
        raise ValueError(f"oracle mode supports n <= {ORACLE_MAX_N}, graph has {g.n} vertices")
    if config.mode != "er" and b is None:
        b = np.zeros(g.n)
    allowed = {"er": {"I", "D", "Q", "T"}, "solver": {"I", "D", "C", "X", "EN", "T"}}
    allowed["energy"] = allowed["solver"]

    logger.info(f"Replaying {len(ops)} operations: mode={config.mode}, algo={config.algo}, seed={config.seed}")
    oracle = Oracle(g, b) if config.oracle else None
    start = time.perf_counter_ns()
    engine = ENGINES[config.algo](config, g.copy(), None if b is None else b.copy())
    setup_micros = (time.perf_counter_ns() - start) // 1000

    rows: List[Dict[str, Any]] = []
    queries = checked = passed = 0
    has_nan = False
    max_err = 0.0
    total_micros = setup_micros
    for op in ops:
        if op.code not in allowed[config.mode]:
            raise StreamFormatError(f"operation {op.code} not valid in {config.mode} mode", op.lineno)
        t0 = time.perf_counter_ns()
        answer = None
        if op.code == "I":
            engine.insert(*op.args)
        elif op.code == "D":
            engine.delete(*op.args)
        elif op.code == "T":
            engine.terminal(*op.args)
        elif op.code == "C":
            engine.change(*op.args)
        elif op.code == "Q":
            answer = engine.er(*op.args)
        elif op.code == "X":
            answer = engine.potential_difference(*op.args)
        else:
            answer = engine.energy()
        micros = (time.perf_counter_ns() - t0) // 1000
        total_micros += micros

        row = {"op": op.code, "args": op.text_args, "answer": _format(answer), "exact": "",
               "rel_err": "", "pass": "", "micros": micros, "ops_since_rebuild": engine.ops_since_rebuild}
        if oracle is not None:
            oracle.apply(op)
        if answer is not None:
            queries += 1
            if math.isnan(answer):
                has_nan = True
            if oracle is not None:
                exact, err = oracle.answer(op, answer)
                good = err <= config.epsilon
                checked += 1
                passed += int(good)
                if math.isfinite(err):
                    max_err = max(max_err, err)
                row.update({"exact": _format(exact), "rel_err": _format(err), "pass": _format(good)})
        rows.append(row)

    pass_rate = passed / checked if checked else None
    exit_code = 0
    if has_nan or (pass_rate is not None and pass_rate < config.min_pass_rate):
        exit_code = 1
    amortized = total_micros // max(len(ops), 1)
    rows.append({
        "op": "summary", "args": f"ops={len(ops)};queries={queries};rebuilds={engine.rebuilds}",
        "answer": _format(pass_rate), "exact": "", "rel_err": _format(max_err if checked else None),
        "pass": _format(exit_code == 0), "micros": total_micros, "ops_since_rebuild": amortized,
    })
    buffer = io.StringIO()
    write_csv(rows, buffer)
    logger.info(f"Replay finished: {queries} queries, pass rate {pass_rate}, {total_micros} us total")
    return RunResult(rows, buffer.getvalue(), len(ops), queries, checked, passed, has_nan, total_micros,
                     engine.rebuilds, exit_code, max_err)


def run(config: RunConfig) -> RunResult:
    """Load the configured files, replay, and write the CSV if an output path is set."""
    g, ops, b = load_inputs(config)
    result = replay(config, g, ops, b)
    if config.out:
        with open(config.out, 'w', encoding='utf-8') as f:
            f.write(result.csv_text)
        logger.info(f"Wrote {config.out}")
    return result


# experiments


@dataclass
class LoadRow:
    k: int
    vertices: int
    max_load: int
    argmax: int
    in_core: bool


def load_experiment(ks: Sequence[int], seed: int) -> List[LoadRow]:
    """
    Run a walk from every vertex of a path-augmented expander until it has
    seen k distinct vertices and record how often each vertex is visited.
    """
    rows = []
    for k in ks:
        g = gen_path_augmented_expander(k, seed)
        rng = generator(seed, HARNESS, k)
        load = np.zeros(g.n, dtype=np.int64)
        for v in range(g.n):
            walk = simulate_until_distinct(g, v, k, rng)
            np.add.at(load, walk.trajectory, 1)
        argmax = int(np.argmax(load))
        rows.append(LoadRow(k, g.n, int(load[argmax]), argmax, argmax < k))
        logger.info(f"Load experiment k={k}: max load {load[argmax]} at vertex {argmax}")
    return rows


def barnes_feige_trend(targets: Sequence[int], seed: int, trials: int = 21) -> List[Tuple[int, float, int]]:
    """(target edge count, median steps, 4 * target^2) on random 3-regular graphs."""
    out = []
    for target in targets:
        n = max(10, 2 * math.ceil(target / 3) + 2)
        n += n % 2
        g = from_networkx(nx.random_regular_graph(3, n, seed=seed + target))
        rng = generator(seed, HARNESS, target)
        starts = rng.integers(0, g.n, size=trials)
        steps = [steps_to_distinct_edges(g, int(s), target, rng) for s in starts]
        out.append((target, float(np.median(steps)), 4 * target ** 2))
    return out


def rho_scaling_experiment(g: MultiGraph, pairs: Sequence[Tuple[int, int]], factors: Sequence[float] = (1, 4, 16),
                           seed: int = 0, epsilon: float = 0.5, base_c_rho: float = 2.0,
                           beta: float = 0.2) -> List[Tuple[float, int, float]]:
    """
    (factor, rho, mean relative ER error) with the pair endpoints as the
    only terminals and c_rho scaled by each factor.
    """
    L = g.laplacian()
    terminals = sorted({x for pair in pairs for x in pair})
    out = []
    for factor in factors:
        constants = walk_constants().with_overrides(c_rho=base_c_rho * factor)
        ds = DynamicSC.initialize(g.copy(), terminals, beta, epsilon, seed=seed, constants=constants,
                                  sample_terminals=False)
        current = ds.current_sparsifier()
        index = {v: i for i, v in enumerate(current.terminals)}
        L_H = current.laplacian()
        errors = []
        for s, t in pairs:
            exact = exact_er(L, s, t)
            rhs = np.zeros(len(index))
            rhs[index[s]], rhs[index[t]] = 1.0, -1.0
            x = solve_lap(L_H, rhs, 1e-9)
            errors.append(abs(float(x[index[s]] - x[index[t]]) - exact) / exact)
        out.append((float(factor), ds.rho, float(np.mean(errors))))
    return out


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)
