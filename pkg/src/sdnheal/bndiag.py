"""Root-cause diagnosis over a topology-derived noisy-OR Bayesian network.

The network is bipartite: binary fault variables (component failures,
agent crashes, service faults, controller crash, interface traffic drops)
point at binary symptom variables (the alarm vocabulary). Each symptom
has a leaky noisy-OR conditional distribution: every active parent
independently fails to trigger it with probability 1 - p_edge, and a leak
lets it fire spontaneously.

Edge strengths distinguish direct edges (the symptom the fault itself
raises in the simulator's generative model) from indirect ones (symptoms
the fault merely makes plausible). Inference is exact: variable
elimination with min-fill ordering for production queries, and a
brute-force joint enumeration kept as an independent reference oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from enum import Enum

import numpy as np

from .netmodel import NodeKind, Topology
from .taxonomy import FaultClass, Symptom, symptom_vocabulary

EvidenceMap = dict[str, bool]


class BnError(ValueError):
    """Construction or inference request cannot be satisfied."""


class ImpossibleEvidenceError(BnError):
    """The observed evidence has probability zero under the network."""


# ---------------------------------------------------------------------------
# Variable naming


_FAULT_TAG = {
    FaultClass.PHYSICAL_FAILURE: "physical",
    FaultClass.OPENFLOW_AGENT_CRASH: "agent",
    FaultClass.SERVICE_FAULT: "service",
    FaultClass.CONTROLLER_CRASH: "controller",
    FaultClass.INTERFACE_TRAFFIC_DROP: "drop",
}
_TAG_FAULT = {tag: fc for fc, tag in _FAULT_TAG.items()}


def fault_var_id(fault_class: FaultClass, target: str) -> str:
    return f"fault:{_FAULT_TAG[fault_class]}:{target}"


def symptom_var_id(symptom: Symptom, emitter: str) -> str:
    return f"symptom:{symptom.value}:{emitter}"


def parse_fault_var(var_id: str) -> tuple[FaultClass, str]:
    kind, tag, target = var_id.split(":", 2)
    if kind != "fault" or tag not in _TAG_FAULT:
        raise BnError(f"not a fault variable id: {var_id}")
    return _TAG_FAULT[tag], target


def parse_symptom_var(var_id: str) -> tuple[Symptom, str]:
    kind, tag, emitter = var_id.split(":", 2)
    if kind != "symptom":
        raise BnError(f"not a symptom variable id: {var_id}")
    return Symptom(tag), emitter


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class BnVariable:
    id: str
    kind: str  # "fault" or "symptom"
    target: str
    fault_class: FaultClass | None = None
    symptom: Symptom | None = None


@dataclass(frozen=True)
class NoisyOrCpt:
    child: str
    parents: tuple[str, ...]
    link_probabilities: tuple[float, ...]
    leak: float


@dataclass(frozen=True)
class BayesNet:
    variables: tuple[BnVariable, ...]
    priors: dict[str, float]
    cpts: dict[str, NoisyOrCpt]

    @property
    def fault_ids(self) -> list[str]:
        return [v.id for v in self.variables if v.kind == "fault"]

    @property
    def symptom_ids(self) -> list[str]:
        return [v.id for v in self.variables if v.kind == "symptom"]

    def variable(self, var_id: str) -> BnVariable:
        for v in self.variables:
            if v.id == var_id:
                return v
        raise KeyError(var_id)


@dataclass(frozen=True)
class BnParams:
    """Network parameters. All values are artifact defaults, not measured."""

    prior_physical: float = 0.01
    prior_agent: float = 0.02
    prior_service: float = 0.02
    prior_controller: float = 0.005
    prior_drop: float = 0.02
    p_direct: float = 0.95
    p_indirect: float = 0.8
    leak: float = 0.001
    threshold: float = 0.5
    include_hosts: bool = False
    max_parents: int = 20

    def __post_init__(self) -> None:
        for name in (
            "prior_physical", "prior_agent", "prior_service",
            "prior_controller", "prior_drop",
        ):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise BnError(f"{name.replace('_', '-')} must be in (0,1): {value}")
        for name in ("p_direct", "p_indirect", "leak"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise BnError(f"{name.replace('_', '-')} out of [0,1]: {value}")
        if not 0.0 < self.threshold < 1.0:
            raise BnError(f"threshold must be in (0,1): {self.threshold}")
        if self.max_parents < 1:
            raise BnError(f"max-parents must be >= 1: {self.max_parents}")


_PARAM_KEYS = {
    "p-direct": "p_direct",
    "p-indirect": "p_indirect",
    "leak": "leak",
    "threshold": "threshold",
    "include-hosts": "include_hosts",
    "max-parents": "max_parents",
}
_PRIOR_KEYS = {
    FaultClass.PHYSICAL_FAILURE.value: "prior_physical",
    FaultClass.OPENFLOW_AGENT_CRASH.value: "prior_agent",
    FaultClass.SERVICE_FAULT.value: "prior_service",
    FaultClass.CONTROLLER_CRASH.value: "prior_controller",
    FaultClass.INTERFACE_TRAFFIC_DROP.value: "prior_drop",
}


def params_from_dict(doc: dict | None) -> BnParams:
    """Apply a parameter override document on top of the defaults."""
    if not doc:
        return BnParams()
    kwargs = {}
    for key, value in doc.items():
        if key == "priors":
            for cls_name, p in value.items():
                if cls_name not in _PRIOR_KEYS:
                    raise BnError(f"unknown fault class in priors: {cls_name}")
                kwargs[_PRIOR_KEYS[cls_name]] = float(p)
        elif key in _PARAM_KEYS:
            field = _PARAM_KEYS[key]
            if field == "include_hosts":
                kwargs[field] = bool(value)
            elif field == "max_parents":
                kwargs[field] = int(value)
            else:
                kwargs[field] = float(value)
        else:
            raise BnError(f"unknown parameter key: {key}")
    return replace(BnParams(), **kwargs)


def params_echo(params: BnParams, override_doc: dict | None) -> dict:
    """Flag, per parameter, whether the value is a built-in default."""
    overridden: set[str] = set()
    if override_doc:
        for key, value in override_doc.items():
            if key == "priors":
                overridden.update(_PRIOR_KEYS[k] for k in value)
            else:
                overridden.add(_PARAM_KEYS.get(key, key))
    echo = {}
    for f in fields(params):
        hyphen = f.name.replace("_", "-")
        echo[hyphen] = {
            "value": getattr(params, f.name),
            "source": "override" if f.name in overridden else "default",
        }
    return echo


# ---------------------------------------------------------------------------
# Construction


def noisy_or_row(active_probabilities: list[float], leak: float) -> float:
    """P(symptom | the given parents active) under leaky noisy-OR."""
    for p in list(active_probabilities) + [leak]:
        if not 0.0 <= p <= 1.0:
            raise BnError(f"probability out of range: {p}")
    q = 1.0 - leak
    for p in active_probabilities:
        q *= 1.0 - p
    return 1.0 - q


def build_bn(t: Topology, params: BnParams = BnParams()) -> BayesNet:
    """Derive the diagnosis network from a topology and its services.

    Fault variables: a physical failure per link and per non-host node
    (hosts are outside the repair domain unless include_hosts is set), a
    traffic-drop fault per link, an agent crash per OpenFlow switch, one
    controller crash, and one service fault per service. Symptom variables
    mirror the monitored alarm vocabulary; their parent sets follow the
    fault propagation rules, with direct edges at p_direct and indirect
    ones at p_indirect. Construction is deterministic.
    """
    variables: list[BnVariable] = []
    priors: dict[str, float] = {}

    def add_fault(fc: FaultClass, target: str, prior: float) -> str:
        vid = fault_var_id(fc, target)
        variables.append(
            BnVariable(id=vid, kind="fault", target=target, fault_class=fc)
        )
        priors[vid] = prior
        return vid

    nodes = sorted(t.nodes, key=lambda n: n.id)
    links = sorted(t.links, key=lambda l: l.id)
    services = sorted(t.services, key=lambda s: s.id)

    phys: dict[str, str] = {}
    for n in nodes:
        if n.kind is NodeKind.HOST and not params.include_hosts:
            continue
        phys[n.id] = add_fault(FaultClass.PHYSICAL_FAILURE, n.id, params.prior_physical)
    for l in links:
        phys[l.id] = add_fault(FaultClass.PHYSICAL_FAILURE, l.id, params.prior_physical)

    drop = {
        l.id: add_fault(FaultClass.INTERFACE_TRAFFIC_DROP, l.id, params.prior_drop)
        for l in links
    }
    agent = {
        n.id: add_fault(FaultClass.OPENFLOW_AGENT_CRASH, n.id, params.prior_agent)
        for n in nodes
        if n.kind is NodeKind.OPENFLOW_SWITCH
    }
    ctrl = add_fault(
        FaultClass.CONTROLLER_CRASH, t.controller_id, params.prior_controller
    )
    svc = {
        s.id: add_fault(FaultClass.SERVICE_FAULT, s.id, params.prior_service)
        for s in services
    }

    direct, indirect = params.p_direct, params.p_indirect
    cpts: dict[str, NoisyOrCpt] = {}

    def add_symptom(symptom: Symptom, emitter: str, parents: dict[str, float]) -> None:
        vid = symptom_var_id(symptom, emitter)
        if len(parents) > params.max_parents:
            raise BnError(
                f"parent cap exceeded: {vid} has {len(parents)} parents "
                f"(cap {params.max_parents})"
            )
        ordered = tuple(sorted(parents))
        variables.append(
            BnVariable(id=vid, kind="symptom", target=emitter, symptom=symptom)
        )
        cpts[vid] = NoisyOrCpt(
            child=vid,
            parents=ordered,
            link_probabilities=tuple(parents[p] for p in ordered),
            leak=params.leak,
        )

    for symptom, emitter in symptom_vocabulary(t, include_hosts=params.include_hosts):
        parents: dict[str, float] = {}
        if symptom is Symptom.LINK_DOWN:
            link = t.link(emitter)
            parents[phys[emitter]] = direct
            for end in link.endpoints:
                if end in phys:  # a failed endpoint takes its links down too
                    parents[phys[end]] = direct
        elif symptom is Symptom.NODE_UNREACHABLE:
            parents[phys[emitter]] = direct
        elif symptom is Symptom.OF_SESSION_LOST:
            parents[agent[emitter]] = direct
            parents[ctrl] = direct
            if emitter in phys:
                parents[phys[emitter]] = indirect
        elif symptom is Symptom.TRAFFIC_DROP:
            link = t.link(emitter)
            parents[drop[emitter]] = direct
            parents[phys[emitter]] = direct
            for end in link.endpoints:
                if end in phys:
                    parents[phys[end]] = indirect
        elif symptom is Symptom.SERVICE_DOWN:
            service = t.service(emitter)
            parents[svc[emitter]] = direct
            for hop in service.path:
                if hop in phys:
                    parents[phys[hop]] = direct
                if hop in agent:
                    parents[agent[hop]] = indirect
        elif symptom is Symptom.SLA_VIOLATION:
            service = t.service(emitter)
            parents[svc[emitter]] = indirect
            for hop in service.path:
                if hop in phys:
                    parents[phys[hop]] = indirect
                if hop in agent:
                    parents[agent[hop]] = indirect
                if hop in drop:  # degradation is what a traffic drop causes
                    parents[drop[hop]] = direct
        add_symptom(symptom, emitter, parents)

    variables.sort(key=lambda v: (v.kind, v.id))
    return BayesNet(variables=tuple(variables), priors=priors, cpts=cpts)


# ---------------------------------------------------------------------------
# Factors and exact inference


@dataclass(frozen=True, eq=False)
class Factor:
    """Table over binary variables; axis i indexes scope[i], 0=false 1=true."""

    scope: tuple[str, ...]
    table: np.ndarray


def _false_row_table(cpt: NoisyOrCpt) -> np.ndarray:
    """P(child=false | parents) over all parent assignments, shape (2,)*k."""
    k = len(cpt.parents)
    q = np.full((2,) * k, 1.0 - cpt.leak)
    for axis, p in enumerate(cpt.link_probabilities):
        index = [slice(None)] * k
        index[axis] = 1
        q[tuple(index)] *= 1.0 - p
    return q


def _cpt_table(cpt: NoisyOrCpt) -> np.ndarray:
    """Expand a noisy-OR CPT to a full table over parents + child."""
    q = _false_row_table(cpt)
    return np.stack([q, 1.0 - q], axis=-1)


def compile_factors(bn: BayesNet, evidence: EvidenceMap) -> list[Factor]:
    """One prior factor per fault, one expanded CPT per symptom.

    Observed variables are sliced out of every factor scope, so the
    returned factors range over unobserved variables only. Symptoms are
    leaves of the bipartite graph, so slicing only ever removes the child
    axis of its own CPT; the slice is fused into the expansion instead of
    materializing the full table first.
    """
    symptom_ids = set(bn.symptom_ids)
    for key in evidence:
        if key not in symptom_ids:
            raise BnError(f"evidence key is not a symptom variable: {key}")

    factors = []
    for fid in bn.fault_ids:
        p = bn.priors[fid]
        factors.append(Factor(scope=(fid,), table=np.array([1.0 - p, p])))
    for sid in bn.symptom_ids:
        cpt = bn.cpts[sid]
        if sid in evidence:
            q = _false_row_table(cpt)
            table = (1.0 - q) if evidence[sid] else q
            factors.append(Factor(scope=cpt.parents, table=table))
        else:
            factors.append(Factor(scope=cpt.parents + (sid,), table=_cpt_table(cpt)))
    return factors


def _sum_out(factor: Factor, var: str) -> Factor:
    axis = factor.scope.index(var)
    return Factor(
        scope=factor.scope[:axis] + factor.scope[axis + 1 :],
        table=factor.table.sum(axis=axis),
    )


def min_fill_order(variables: set[str], scopes: list[tuple[str, ...]]) -> list[str]:
    """Greedy min-fill elimination order with lexicographic tie-break.

    Fill costs are cached and recomputed only for vertices whose
    neighborhood changed; a zero-cost (simplicial) vertex short-circuits
    the scan. Both are pure speedups: the selected order is identical to
    the naive argmin over (fill cost, variable id).
    """
    neighbors: dict[str, set[str]] = {v: set() for v in variables}
    for scope in scopes:
        members = [v for v in scope if v in neighbors]
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                neighbors[a].add(b)
                neighbors[b].add(a)

    def fill_cost(v: str) -> int:
        around = list(neighbors[v])
        return sum(
            1
            for i, a in enumerate(around)
            for b in around[i + 1 :]
            if b not in neighbors[a]
        )

    cost = {v: fill_cost(v) for v in variables}
    order = []
    remaining = sorted(variables)
    while remaining:
        best = None
        for v in remaining:  # sorted, so the first zero wins ties correctly
            if cost[v] == 0:
                best = v
                break
            if best is None or cost[v] < cost[best]:
                best = v
        order.append(best)
        remaining.remove(best)

        around = list(neighbors[best])
        touched = set(around)
        for i, a in enumerate(around):
            for b in around[i + 1 :]:
                if b not in neighbors[a]:
                    neighbors[a].add(b)
                    neighbors[b].add(a)
                    touched |= neighbors[a] & neighbors[b]
        for a in around:
            neighbors[a].discard(best)
        del neighbors[best]
        for v in touched:
            if v in neighbors:
                cost[v] = fill_cost(v)
    return order


@dataclass(frozen=True)
class Posterior:
    """Per-fault (P(false|e), P(true|e)) pairs from one inference query set."""

    pairs: dict[str, tuple[float, float]]

    def marginal(self, fault_id: str) -> float:
        return self.pairs[fault_id][1]

    @property
    def marginals(self) -> dict[str, float]:
        return {fid: pair[1] for fid, pair in self.pairs.items()}

    def ranking(self) -> list[tuple[str, float]]:
        return sorted(self.marginals.items(), key=lambda item: (-item[1], item[0]))


def _project(factor: Factor, keep: tuple[str, ...]) -> Factor:
    kept = set(keep)
    axes = tuple(i for i, v in enumerate(factor.scope) if v not in kept)
    if not axes:
        return factor
    return Factor(
        scope=tuple(v for v in factor.scope if v in kept),
        table=factor.table.sum(axis=axes),
    )


def posterior_marginals(bn: BayesNet, evidence: EvidenceMap) -> Posterior:
    """Exact P(fault | evidence) for every fault variable.

    One variable-elimination sweep along a min-fill ordering over the
    unobserved variables; each bucket's elimination message is kept and a
    reverse sweep sends the complementary message back down, so every
    fault marginal is read off its own bucket without re-eliminating.
    This reuse changes cost only, never results.
    """
    factors = compile_factors(bn, evidence)
    unobserved = {v.id for v in bn.variables if v.id not in evidence}
    order = min_fill_order(unobserved, [f.scope for f in factors])
    position = {v: i for i, v in enumerate(order)}
    n = len(order)

    def canonical(f: Factor) -> Factor:
        # scopes sorted by elimination position make products pure
        # broadcasts; paying one transpose here avoids one per product
        perm = sorted(range(len(f.scope)), key=lambda k: position[f.scope[k]])
        if perm == list(range(len(f.scope))):
            return f
        return Factor(
            scope=tuple(f.scope[k] for k in perm), table=f.table.transpose(perm)
        )

    def multiply(f1: Factor, f2: Factor) -> Factor:
        in1, in2 = set(f1.scope), set(f2.scope)
        scope = tuple(
            sorted(in1 | in2, key=position.__getitem__)
        )
        shape1 = tuple(2 if v in in1 else 1 for v in scope)
        shape2 = tuple(2 if v in in2 else 1 for v in scope)
        return Factor(
            scope=scope, table=f1.table.reshape(shape1) * f2.table.reshape(shape2)
        )

    def combine(parts: list[Factor], var: str) -> Factor:
        if not parts:
            return Factor(scope=(var,), table=np.array([1.0, 1.0]))
        ordered = sorted(parts, key=lambda f: f.table.size)
        combined = ordered[0]
        for f in ordered[1:]:
            combined = multiply(combined, f)
        return combined

    originals: list[list[Factor]] = [[] for _ in range(n)]
    constants: list[float] = []
    for f in factors:
        if f.scope:
            originals[min(position[v] for v in f.scope)].append(canonical(f))
        else:
            constants.append(float(f.table))

    # Upward sweep: eliminate in order, parking each message at the bucket
    # of its earliest-eliminated remaining variable. Small bucket products
    # are kept for the marginal pass; pinning the large ones would defeat
    # the allocator's reuse of big blocks, so those are rebuilt on demand.
    incoming: list[dict[int, Factor]] = [{} for _ in range(n)]
    children: list[list[int]] = [[] for _ in range(n)]
    upward: list[Factor | None] = [None] * n
    for i in range(n):
        combined = combine(originals[i] + list(incoming[i].values()), order[i])
        if combined.table.size <= 4096:
            upward[i] = combined
        message = _sum_out(combined, order[i])
        if message.scope:
            parent = min(position[v] for v in message.scope)
            incoming[parent][i] = message
            children[parent].append(i)
        else:
            constants.append(float(message.table))

    z_total = 1.0
    for c in constants:
        z_total *= c
    if z_total == 0.0:
        raise ImpossibleEvidenceError("evidence has zero probability under the network")

    # Downward sweep: each bucket sends its children everything it knows
    # except the child's own upward message, projected on the separator.
    down: list[Factor | None] = [None] * n
    for i in reversed(range(n)):
        if not children[i]:
            continue
        base_parts = originals[i] + ([down[i]] if down[i] is not None else [])
        if len(children[i]) == 1:
            child = children[i][0]
            combined = combine(base_parts, order[i])
            down[child] = _project(combined, incoming[i][child].scope)
            continue
        base = combine(base_parts, order[i]) if base_parts else None
        for child in children[i]:
            parts = [m for c, m in incoming[i].items() if c != child]
            if base is not None:
                parts.append(base)
            combined = combine(parts, order[i])
            down[child] = _project(combined, incoming[i][child].scope)

    pairs: dict[str, tuple[float, float]] = {}
    for fid in sorted(bn.fault_ids):
        i = position[fid]
        full = upward[i]
        if full is None:
            full = combine(originals[i] + list(incoming[i].values()), fid)
        if down[i] is not None:
            full = multiply(full, down[i])
        raw = _project(full, (fid,))
        table = raw.table
        z = float(table[0] + table[1])
        if z == 0.0:
            raise ImpossibleEvidenceError(
                "evidence has zero probability under the network"
            )
        pairs[fid] = (float(table[0]) / z, float(table[1]) / z)
    return Posterior(pairs=pairs)


def enumerate_joint(bn: BayesNet, evidence: EvidenceMap) -> Posterior:
    """Reference oracle: marginals by summation over every joint assignment.

    Materializes the probability of all 2^n assignments, so it is capped at
    20 variables. Shares no code with the variable-elimination path.
    """
    all_vars = sorted(v.id for v in bn.variables)
    n = len(all_vars)
    if n > 20:
        raise BnError(f"enumeration capped at 20 variables, got {n}")
    position = {v: i for i, v in enumerate(all_vars)}
    index = np.arange(2**n, dtype=np.int64)

    def bit(var: str) -> np.ndarray:
        return (index >> (n - 1 - position[var])) & 1

    joint = np.ones(2**n)
    for fid in bn.fault_ids:
        p = bn.priors[fid]
        joint = joint * np.where(bit(fid) == 1, p, 1.0 - p)
    for sid in bn.symptom_ids:
        cpt = bn.cpts[sid]
        q = np.full(2**n, 1.0 - cpt.leak)
        for parent, p in zip(cpt.parents, cpt.link_probabilities):
            q = q * np.where(bit(parent) == 1, 1.0 - p, 1.0)
        joint = joint * np.where(bit(sid) == 1, 1.0 - q, q)

    mask = np.ones(2**n, dtype=bool)
    for var, value in evidence.items():
        if var not in position:
            raise BnError(f"evidence key is not a network variable: {var}")
        mask &= bit(var) == int(value)

    z = float(joint[mask].sum())
    if z == 0.0:
        raise ImpossibleEvidenceError("evidence has zero probability under the network")
    pairs = {}
    for fid in bn.fault_ids:
        p_true = float(joint[mask & (bit(fid) == 1)].sum())
        pairs[fid] = ((z - p_true) / z, p_true / z)
    return Posterior(pairs=pairs)


# ---------------------------------------------------------------------------
# Diagnosis


class Verdict(str, Enum):
    CONFIDENT = "confident"
    SUSPECT = "suspect"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Diagnosis:
    ranked: tuple[tuple[str, float], ...]
    verdict: Verdict
    threshold: float


def map_diagnosis(
    posterior: Posterior, threshold: float, priors: dict[str, float]
) -> Diagnosis:
    """Grade a posterior into confident / suspect / inconclusive.

    Confident: every fault at or above the threshold, ranked. Suspect: the
    top fault rose to at least 10x its prior. Inconclusive: neither, with
    the full ranking attached for the caller to widen evidence on.
    """
    if not 0.0 < threshold < 1.0:
        raise BnError(f"threshold must be in (0,1): {threshold}")
    full = posterior.ranking()
    confident = [(f, p) for f, p in full if p >= threshold]
    if confident:
        return Diagnosis(tuple(confident), Verdict.CONFIDENT, threshold)
    if full:
        top_fault, top_p = full[0]
        if top_p >= 10.0 * priors[top_fault]:
            return Diagnosis(((top_fault, top_p),), Verdict.SUSPECT, threshold)
    return Diagnosis(tuple(full), Verdict.INCONCLUSIVE, threshold)


# ---------------------------------------------------------------------------
# BN dump document (round-trippable)


def bn_to_dict(bn: BayesNet) -> dict:
    return {
        "schema-version": 1,
        "variables": [
            {
                "id": v.id,
                "kind": v.kind,
                "target": v.target,
                **(
                    {"fault-class": v.fault_class.value}
                    if v.fault_class
                    else {"symptom": v.symptom.value}
                ),
            }
            for v in bn.variables
        ],
        "priors": dict(sorted(bn.priors.items())),
        "cpts": [
            {
                "child": cpt.child,
                "parents": list(cpt.parents),
                "link-probabilities": list(cpt.link_probabilities),
                "leak": cpt.leak,
            }
            for _, cpt in sorted(bn.cpts.items())
        ],
    }


def bn_from_dict(doc: dict) -> BayesNet:
    if doc.get("schema-version", 1) != 1:
        raise BnError(f"unsupported schema-version: {doc.get('schema-version')}")
    variables = []
    for entry in doc["variables"]:
        variables.append(
            BnVariable(
                id=entry["id"],
                kind=entry["kind"],
                target=entry["target"],
                fault_class=(
                    FaultClass(entry["fault-class"]) if "fault-class" in entry else None
                ),
                symptom=Symptom(entry["symptom"]) if "symptom" in entry else None,
            )
        )
    variables.sort(key=lambda v: (v.kind, v.id))
    cpts = {}
    for entry in doc["cpts"]:
        cpts[entry["child"]] = NoisyOrCpt(
            child=entry["child"],
            parents=tuple(entry["parents"]),
            link_probabilities=tuple(float(p) for p in entry["link-probabilities"]),
            leak=float(entry["leak"]),
        )
    bn = BayesNet(
        variables=tuple(variables),
        priors={k: float(v) for k, v in doc["priors"].items()},
        cpts=cpts,
    )
    _check_structure(bn)
    return bn


def load_bn(text: str) -> BayesNet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BnError(f"malformed network document: {exc}") from exc
    return bn_from_dict(doc)


def _check_structure(bn: BayesNet) -> None:
    fault_ids = set(bn.fault_ids)
    symptom_ids = set(bn.symptom_ids)
    for sid in symptom_ids:
        cpt = bn.cpts.get(sid)
        if cpt is None or not cpt.parents:
            raise BnError(f"symptom without parents: {sid}")
        for parent in cpt.parents:
            if parent not in fault_ids:
                raise BnError(f"non-fault parent {parent} of {sid}")
    for fid in fault_ids:
        if not 0.0 < bn.priors.get(fid, 0.0) < 1.0:
            raise BnError(f"fault prior out of (0,1): {fid}")
