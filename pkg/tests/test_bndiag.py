import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdnheal import bndiag
from sdnheal.bndiag import (
    BnError,
    BnParams,
    ImpossibleEvidenceError,
    Verdict,
    enumerate_joint,
    map_diagnosis,
    noisy_or_row,
    posterior_marginals,
)
from sdnheal.netmodel import NodeKind
from sdnheal.taxonomy import FaultClass, Symptom

from conftest import make_bn2, random_evidence, random_noisy_or_bn
from topogen import random_topology

# Frozen from the enumeration oracle (cross-checked by hand arithmetic on
# the 8 joint states of BN2).
BN2_P_GIVEN_Y = 0.4766918357738374


# ---------------------------------------------------------------------------
# noisy-OR parameterization


def test_noisy_or_row_leak_only():
    assert noisy_or_row([], 0.001) == pytest.approx(0.001, abs=1e-15)


def test_noisy_or_row_single_cause():
    assert noisy_or_row([0.9], 0.0) == pytest.approx(0.9, abs=1e-15)


def test_noisy_or_row_two_causes():
    assert noisy_or_row([0.9, 0.8], 0.0) == pytest.approx(0.98, abs=1e-15)


def test_noisy_or_row_rejects_out_of_range():
    with pytest.raises(BnError, match="out of range"):
        noisy_or_row([1.2], 0.0)


@given(
    st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=6),
    st.floats(min_value=0.0, max_value=1.0),
    st.integers(min_value=0, max_value=6),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_noisy_or_row_monotone(probs, leak, index, bump):
    base = noisy_or_row(probs, leak)
    assert 0.0 <= base <= 1.0
    if probs:
        index %= len(probs)
        raised = list(probs)
        raised[index] = min(1.0, raised[index] + bump * (1.0 - raised[index]))
        assert noisy_or_row(raised, leak) >= base - 1e-12
    assert noisy_or_row(probs, min(1.0, leak + bump * (1.0 - leak))) >= base - 1e-12


# ---------------------------------------------------------------------------
# construction


def test_build_bn_t1_variable_counts(t1):
    bn = bndiag.build_bn(t1)
    by_class = {}
    for fid in bn.fault_ids:
        fault_class, _ = bndiag.parse_fault_var(fid)
        by_class[fault_class] = by_class.get(fault_class, 0) + 1
    # 4 infra nodes + 5 links carry physical faults (hosts excluded);
    # every link can also silently drop traffic
    assert by_class == {
        FaultClass.PHYSICAL_FAILURE: 9,
        FaultClass.OPENFLOW_AGENT_CRASH: 3,
        FaultClass.CONTROLLER_CRASH: 1,
        FaultClass.SERVICE_FAULT: 1,
        FaultClass.INTERFACE_TRAFFIC_DROP: 5,
    }
    by_symptom = {}
    for sid in bn.symptom_ids:
        symptom, _ = bndiag.parse_symptom_var(sid)
        by_symptom[symptom] = by_symptom.get(symptom, 0) + 1
    assert by_symptom == {
        Symptom.LINK_DOWN: 5,
        Symptom.NODE_UNREACHABLE: 4,
        Symptom.OF_SESSION_LOST: 3,
        Symptom.TRAFFIC_DROP: 5,
        Symptom.SERVICE_DOWN: 1,
        Symptom.SLA_VIOLATION: 1,
    }


def test_build_bn_service_down_parents(t1):
    bn = bndiag.build_bn(t1)
    cpt = bn.cpts["symptom:service-down:v1"]
    assert set(cpt.parents) == {
        "fault:service:v1",
        "fault:physical:la",
        "fault:physical:s1",
        "fault:physical:l1",
        "fault:physical:s2",
        "fault:physical:lb",
        "fault:agent:s1",
        "fault:agent:s2",
    }
    strengths = dict(zip(cpt.parents, cpt.link_probabilities))
    # agent crashes only make an outage plausible; the rest cause it
    for parent, p in strengths.items():
        if parent.startswith("fault:agent:"):
            assert p == BnParams().p_indirect
        else:
            assert p == BnParams().p_direct


def test_build_bn_sla_parents_add_traffic_drops(t1):
    bn = bndiag.build_bn(t1)
    cpt = bn.cpts["symptom:sla-violation:v1"]
    strengths = dict(zip(cpt.parents, cpt.link_probabilities))
    for link in ("la", "l1", "lb"):
        assert strengths[f"fault:drop:{link}"] == BnParams().p_direct
    assert strengths["fault:service:v1"] == BnParams().p_indirect


def test_build_bn_of_session_lost_parents(t1):
    bn = bndiag.build_bn(t1)
    cpt = bn.cpts["symptom:of-session-lost:s1"]
    strengths = dict(zip(cpt.parents, cpt.link_probabilities))
    assert strengths == {
        "fault:agent:s1": BnParams().p_direct,
        "fault:controller:c0": BnParams().p_direct,
        "fault:physical:s1": BnParams().p_indirect,
    }


def test_build_bn_deterministic(t1):
    assert bndiag.build_bn(t1) == bndiag.build_bn(t1)


def test_build_bn_bipartite_with_parents(t1):
    bn = bndiag.build_bn(t1)
    fault_ids = set(bn.fault_ids)
    for sid in bn.symptom_ids:
        cpt = bn.cpts[sid]
        assert cpt.parents, sid
        assert set(cpt.parents) <= fault_ids
    assert not (fault_ids & set(bn.cpts))  # no fault has a CPT


def test_build_bn_include_hosts_flag(t1):
    bn = bndiag.build_bn(t1, BnParams(include_hosts=True))
    assert "fault:physical:h1" in bn.fault_ids
    assert "symptom:node-unreachable:h1" in bn.symptom_ids


def test_build_bn_parent_cap():
    topo = random_topology(5, n_nodes=40, n_services=4, max_path_links=12)
    with pytest.raises(BnError, match="parent cap exceeded"):
        bndiag.build_bn(topo, BnParams(max_parents=10))


def test_bn_dump_round_trip(t1):
    bn = bndiag.build_bn(t1)
    assert bndiag.bn_from_dict(bndiag.bn_to_dict(bn)) == bn


def test_params_from_dict_overrides():
    params = bndiag.params_from_dict(
        {"p-direct": 0.9, "priors": {"physical-failure": 0.05}}
    )
    assert params.p_direct == 0.9
    assert params.prior_physical == 0.05
    assert params.leak == BnParams().leak
    echo = bndiag.params_echo(params, {"p-direct": 0.9, "priors": {"physical-failure": 0.05}})
    assert echo["p-direct"]["source"] == "override"
    assert echo["prior-physical"]["source"] == "override"
    assert echo["leak"]["source"] == "default"


def test_params_from_dict_rejects_unknown_key():
    with pytest.raises(BnError, match="unknown parameter key"):
        bndiag.params_from_dict({"p-sideways": 0.3})


def test_params_validate_ranges():
    with pytest.raises(BnError, match="prior-physical"):
        BnParams(prior_physical=0.0)
    with pytest.raises(BnError, match="p-direct"):
        BnParams(p_direct=1.5)
    with pytest.raises(BnError, match="threshold"):
        BnParams(threshold=1.0)


# ---------------------------------------------------------------------------
# factors


def test_compile_prior_factor(bn2):
    factors = bndiag.compile_factors(bn2, {})
    prior = next(f for f in factors if f.scope == ("fault:service:A",))
    assert np.allclose(prior.table, [0.99, 0.01])


def test_compile_cpt_slice_on_evidence():
    bn = make_bn2()
    # single-parent variant: Y <- A with p 0.9, leak 0
    bn = bndiag.BayesNet(
        variables=tuple(v for v in bn.variables if v.id != "fault:service:B"),
        priors={"fault:service:A": 0.01},
        cpts={
            "symptom:service-down:Y": bndiag.NoisyOrCpt(
                child="symptom:service-down:Y",
                parents=("fault:service:A",),
                link_probabilities=(0.9,),
                leak=0.0,
            )
        },
    )
    factors = bndiag.compile_factors(bn, {"symptom:service-down:Y": True})
    sliced = next(f for f in factors if f.scope == ("fault:service:A",) and f.table[0] == 0.0)
    assert np.allclose(sliced.table, [0.0, 0.9])


def test_compile_rejects_unknown_evidence_key(bn2):
    with pytest.raises(BnError, match="not a symptom variable"):
        bndiag.compile_factors(bn2, {"symptom:service-down:nope": True})


def test_min_fill_order_deterministic(bn2):
    scopes = [f.scope for f in bndiag.compile_factors(bn2, {})]
    variables = {v.id for v in bn2.variables}
    assert bndiag.min_fill_order(variables, scopes) == bndiag.min_fill_order(
        variables, scopes
    )


def _naive_min_fill(variables, scopes):
    neighbors = {v: set() for v in variables}
    for scope in scopes:
        members = [v for v in scope if v in neighbors]
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                neighbors[a].add(b)
                neighbors[b].add(a)

    def fill(v):
        around = list(neighbors[v])
        return sum(
            1
            for i, a in enumerate(around)
            for b in around[i + 1 :]
            if b not in neighbors[a]
        )

    order = []
    remaining = set(variables)
    while remaining:
        best = min(remaining, key=lambda v: (fill(v), v))
        order.append(best)
        around = list(neighbors[best])
        for i, a in enumerate(around):
            for b in around[i + 1 :]:
                neighbors[a].add(b)
                neighbors[b].add(a)
        for a in around:
            neighbors[a].discard(best)
        del neighbors[best]
        remaining.discard(best)
    return order


def test_min_fill_order_matches_naive_greedy():
    """The cached/short-circuited implementation must pick the exact same
    order as the straightforward argmin over (fill cost, id)."""
    rng = random.Random(99)
    for _ in range(25):
        n = rng.randint(3, 14)
        variables = {f"x{i:02d}" for i in range(n)}
        pool = sorted(variables)
        scopes = [
            tuple(rng.sample(pool, k=rng.randint(1, min(4, n))))
            for _ in range(rng.randint(2, 12))
        ]
        assert bndiag.min_fill_order(variables, scopes) == _naive_min_fill(
            variables, scopes
        )


# ---------------------------------------------------------------------------
# inference


def test_bn2_posterior_matches_frozen_oracle_value(bn2):
    evidence = {"symptom:service-down:Y": True}
    oracle = enumerate_joint(bn2, evidence)
    assert oracle.marginal("fault:service:A") == pytest.approx(BN2_P_GIVEN_Y, abs=1e-12)
    assert oracle.marginal("fault:service:B") == pytest.approx(BN2_P_GIVEN_Y, abs=1e-12)
    ve = posterior_marginals(bn2, evidence)
    for fid in ("fault:service:A", "fault:service:B"):
        assert ve.marginal(fid) == pytest.approx(oracle.marginal(fid), abs=1e-9)


def test_bn2_no_evidence_returns_priors(bn2):
    posterior = posterior_marginals(bn2, {})
    assert posterior.marginal("fault:service:A") == pytest.approx(0.01, abs=1e-12)
    assert enumerate_joint(bn2, {}).marginal("fault:service:A") == pytest.approx(
        0.01, abs=1e-12
    )


def test_bn2_with_pointer_symptom_matches_oracle():
    bn = make_bn2(with_z=True)
    evidence = {"symptom:service-down:Y": True, "symptom:sla-violation:Z": True}
    oracle = enumerate_joint(bn, evidence)
    ve = posterior_marginals(bn, evidence)
    for fid in bn.fault_ids:
        assert ve.marginal(fid) == pytest.approx(oracle.marginal(fid), abs=1e-9)


def test_explaining_away_reduces_competitor():
    bn = make_bn2(with_z=True)
    only_y = enumerate_joint(bn, {"symptom:service-down:Y": True})
    both = enumerate_joint(
        bn, {"symptom:service-down:Y": True, "symptom:sla-violation:Z": True}
    )
    assert both.marginal("fault:service:B") < only_y.marginal("fault:service:B")
    assert both.marginal("fault:service:A") > only_y.marginal("fault:service:A")


def test_enumerate_joint_trivial_prior():
    bn = bndiag.BayesNet(
        variables=(bndiag.BnVariable(id="fault:service:F", kind="fault", target="F"),),
        priors={"fault:service:F": 0.3},
        cpts={},
    )
    assert enumerate_joint(bn, {}).marginal("fault:service:F") == pytest.approx(0.3)


def test_enumerate_joint_variable_cap():
    rng = random.Random(0)
    bn = random_noisy_or_bn(rng, max_vars=12)
    while len(bn.variables) <= 20:
        bn = _widen(bn)
    with pytest.raises(BnError, match="capped at 20"):
        enumerate_joint(bn, {})


def _widen(bn):
    extra = tuple(
        bndiag.BnVariable(id=f"fault:service:X{i}", kind="fault", target=f"X{i}")
        for i in range(21)
    )
    priors = dict(bn.priors)
    priors.update({v.id: 0.5 for v in extra})
    return bndiag.BayesNet(variables=bn.variables + extra, priors=priors, cpts=bn.cpts)


def test_oracle_equivalence_on_random_networks():
    rng = random.Random(20240901)
    for _ in range(40):
        bn = random_noisy_or_bn(rng)
        evidence = random_evidence(rng, bn)
        ve = posterior_marginals(bn, evidence)
        oracle = enumerate_joint(bn, evidence)
        for fid in bn.fault_ids:
            assert ve.marginal(fid) == pytest.approx(oracle.marginal(fid), abs=1e-9)


def test_posterior_pairs_normalized(bn2):
    posterior = posterior_marginals(bn2, {"symptom:service-down:Y": True})
    for p_false, p_true in posterior.pairs.values():
        assert abs(p_false + p_true - 1.0) <= 1e-12


def test_single_parent_child_observation_never_lowers_posterior():
    rng = random.Random(5)
    for _ in range(30):
        prior = rng.uniform(0.05, 0.95)
        p = rng.uniform(0.05, 0.95)
        leak = rng.uniform(0.0, 0.05)
        bn = bndiag.BayesNet(
            variables=(
                bndiag.BnVariable(id="fault:service:F", kind="fault", target="F"),
                bndiag.BnVariable(id="symptom:service-down:Y", kind="symptom", target="Y"),
            ),
            priors={"fault:service:F": prior},
            cpts={
                "symptom:service-down:Y": bndiag.NoisyOrCpt(
                    child="symptom:service-down:Y",
                    parents=("fault:service:F",),
                    link_probabilities=(p,),
                    leak=leak,
                )
            },
        )
        with_child = posterior_marginals(bn, {"symptom:service-down:Y": True})
        assert with_child.marginal("fault:service:F") >= prior - 1e-12


def test_impossible_evidence_is_an_error():
    bn = bndiag.BayesNet(
        variables=(
            bndiag.BnVariable(id="fault:service:F", kind="fault", target="F"),
            bndiag.BnVariable(id="symptom:service-down:Y", kind="symptom", target="Y"),
        ),
        priors={"fault:service:F": 0.3},
        cpts={
            "symptom:service-down:Y": bndiag.NoisyOrCpt(
                child="symptom:service-down:Y",
                parents=("fault:service:F",),
                link_probabilities=(0.0,),
                leak=0.0,
            )
        },
    )
    with pytest.raises(ImpossibleEvidenceError):
        posterior_marginals(bn, {"symptom:service-down:Y": True})
    with pytest.raises(ImpossibleEvidenceError):
        enumerate_joint(bn, {"symptom:service-down:Y": True})


# ---------------------------------------------------------------------------
# diagnosis grading


def test_map_diagnosis_confident():
    posterior = bndiag.Posterior(pairs={"A": (0.3, 0.7), "B": (0.8, 0.2)})
    diagnosis = map_diagnosis(posterior, 0.5, {"A": 0.01, "B": 0.01})
    assert diagnosis.verdict is Verdict.CONFIDENT
    assert [fid for fid, _ in diagnosis.ranked] == ["A"]


def test_map_diagnosis_suspect():
    posterior = bndiag.Posterior(pairs={"A": (0.8, 0.2), "B": (0.95, 0.05)})
    diagnosis = map_diagnosis(posterior, 0.5, {"A": 0.01, "B": 0.01})
    assert diagnosis.verdict is Verdict.SUSPECT
    assert [fid for fid, _ in diagnosis.ranked] == ["A"]


def test_map_diagnosis_inconclusive():
    posterior = bndiag.Posterior(pairs={"A": (0.989, 0.011)})
    diagnosis = map_diagnosis(posterior, 0.5, {"A": 0.01})
    assert diagnosis.verdict is Verdict.INCONCLUSIVE
    assert [fid for fid, _ in diagnosis.ranked] == ["A"]


def test_map_diagnosis_tie_break_lexicographic():
    posterior = bndiag.Posterior(pairs={"B": (0.3, 0.7), "A": (0.3, 0.7)})
    diagnosis = map_diagnosis(posterior, 0.5, {"A": 0.01, "B": 0.01})
    assert [fid for fid, _ in diagnosis.ranked] == ["A", "B"]


def test_map_diagnosis_rejects_bad_threshold():
    posterior = bndiag.Posterior(pairs={"A": (0.5, 0.5)})
    with pytest.raises(BnError, match="threshold"):
        map_diagnosis(posterior, 1.5, {"A": 0.01})


# ---------------------------------------------------------------------------
# random-topology structure (smaller sibling of the acceptance sweep)


def test_build_bn_structure_on_random_topologies(t1):
    from sdnheal import netmodel

    for seed in range(5):
        topo = random_topology(seed, n_nodes=25, n_services=4)
        bn = bndiag.build_bn(topo)
        fault_ids = set(bn.fault_ids)
        for service in topo.services:
            parents = set(bn.cpts[f"symptom:service-down:{service.id}"].parents)
            expected = {f"fault:service:{service.id}"}
            for member in netmodel.dependency_set(topo, service.id):
                category = netmodel.component_category(topo, member)
                if category == "link":
                    expected.add(f"fault:physical:{member}")
                elif category == "node":
                    node = topo.node(member)
                    if node.kind is NodeKind.HOST:
                        continue  # hosts are outside the repair domain
                    if node.kind is NodeKind.CONTROLLER and member not in service.path:
                        continue  # orchestrator dependency, not an outage cause
                    expected.add(f"fault:physical:{member}")
                    if node.kind is NodeKind.OPENFLOW_SWITCH:
                        expected.add(f"fault:agent:{member}")
            assert parents == expected, service.id
        assert all(set(bn.cpts[s].parents) <= fault_ids for s in bn.symptom_ids)
