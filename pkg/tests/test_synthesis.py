import pytest

from pragmos.errors import PrimitiveModuleUnsupported
from pragmos.mdt import LoopMode, annotate_loop, decompose
from pragmos.relations import (
    Activity,
    dfg_to_org,
    inject_concurrency,
    normalize_activities,
    paths_to_dfg,
)
from pragmos.synthesis import structure_hash, synthesize
from pragmos.verification import check_soundness, enumerate_traces

import cases
from test_relations import org_from_table


def build(paths, concurrency=None, loops=None):
    corpus = normalize_activities(paths)
    org = dfg_to_org(paths_to_dfg(corpus.paths))
    if concurrency:
        ids = {a.label: a.id for a in corpus.activities.values()}
        org = inject_concurrency(org, {(ids[a], ids[b]) for a, b in concurrency})
    tree = decompose(org)
    if loops:
        ids = {a.label: a.id for a in corpus.activities.values()}
        for block in loops:
            tree = annotate_loop(tree, frozenset(ids[x] for x in block), LoopMode.REPEAT)
    return corpus, tree, synthesize(tree, corpus.activities)


class TestSynthesize:
    def test_car_model_matches_reference(self):
        _, _, model = build(cases.CAR_PATHS)
        assert structure_hash(model) == structure_hash(cases.car_reference_model())

    def test_car_model_element_counts(self):
        _, _, model = build(cases.CAR_PATHS)
        kinds = {}
        for n in model.nodes:
            kinds[n.kind] = kinds.get(n.kind, 0) + 1
        assert kinds == {
            "start": 1,
            "end": 1,
            "task": 6,
            "xor_gateway": 2,
            "and_gateway": 2,
        }

    def test_bicycle_final_model_matches_reference(self):
        _, _, model = build(
            cases.BICYCLE_PATHS, cases.BICYCLE_CONCURRENCY, cases.BICYCLE_LOOPS
        )
        assert structure_hash(model) == structure_hash(cases.bicycle_reference_model())

    def test_trivial_root(self):
        _, _, model = build([["Only Step"]])
        assert [n.kind for n in model.nodes] == ["start", "task", "end"]
        assert enumerate_traces(model, 0) == {("only-step",)}

    def test_exam_repeat_model(self):
        _, _, model = build(cases.EXAM_PATHS, loops=cases.EXAM_LOOPS)
        assert structure_hash(model) == structure_hash(cases.exam_repeat_model())

    def test_task_count_equals_non_silent_leaves(self):
        corpus, tree, model = build(
            cases.BICYCLE_PATHS, cases.BICYCLE_CONCURRENCY, cases.BICYCLE_LOOPS
        )
        leaves = [n for n in tree.walk() if n.leaf_activity and not n.silent]
        assert len(model.tasks()) == len(leaves)

    def test_primitive_rejected(self):
        org = org_from_table("xyz", precedes=[("x", "y"), ("y", "z"), ("x", "z")])
        injected = inject_concurrency(org, {("x", "z")})
        tree = decompose(injected)
        activities = {v: Activity(v, v.upper()) for v in "xyz"}
        with pytest.raises(PrimitiveModuleUnsupported) as exc:
            synthesize(tree, activities)
        assert exc.value.descendants == frozenset("xyz")

    def test_deterministic_ids(self):
        _, _, m1 = build(cases.CAR_PATHS)
        _, _, m2 = build(cases.CAR_PATHS)
        assert m1 == m2
        assert [n.id for n in m1.nodes] == [f"n{i}" for i in range(len(m1.nodes))]

    def test_gateway_arity(self):
        _, _, model = build(
            cases.BICYCLE_PATHS, cases.BICYCLE_CONCURRENCY, cases.BICYCLE_LOOPS
        )
        outgoing = {}
        incoming = {}
        for src, dst in model.flows:
            outgoing[src] = outgoing.get(src, 0) + 1
            incoming[dst] = incoming.get(dst, 0) + 1
        for n in model.nodes:
            if n.gateway_role == "split":
                assert outgoing[n.id] >= 2
            if n.gateway_role == "join":
                assert incoming[n.id] >= 2


class TestStructureHash:
    def test_stable_across_runs(self):
        _, _, m1 = build(cases.CAR_PATHS)
        _, _, m2 = build(cases.CAR_PATHS)
        assert structure_hash(m1) == structure_hash(m2)

    def test_invariant_under_branch_reordering(self):
        base = cases.car_reference_model()
        flows = list(base.flows)
        # emit the AND branches in the opposite order
        i = flows.index(("p1", "d"))
        j = flows.index(("p1", "e"))
        flows[i], flows[j] = flows[j], flows[i]
        reordered = type(base)(
            nodes=base.nodes, flows=tuple(flows), entry=base.entry, exit=base.exit
        )
        assert structure_hash(base) == structure_hash(reordered)

    def test_invariant_under_id_renaming(self):
        base = cases.car_reference_model()
        mapping = {n.id: f"q{idx}" for idx, n in enumerate(base.nodes)}
        renamed = type(base)(
            nodes=tuple(
                type(n)(mapping[n.id], n.kind, n.activity, n.gateway_role)
                for n in base.nodes
            ),
            flows=tuple((mapping[a], mapping[b]) for a, b in base.flows),
            entry=mapping[base.entry],
            exit=mapping[base.exit],
        )
        assert structure_hash(base) == structure_hash(renamed)

    def test_different_processes_differ(self):
        _, _, car = build(cases.CAR_PATHS)
        _, _, exam = build(cases.EXAM_PATHS, loops=cases.EXAM_LOOPS)
        assert structure_hash(car) != structure_hash(exam)


def _dominators(nodes, flows, root, forward=True):
    preds = {n: set() for n in nodes}
    for a, b in flows:
        if forward:
            preds[b].add(a)
        else:
            preds[a].add(b)
    dom = {n: set(nodes) for n in nodes}
    dom[root] = {root}
    changed = True
    while changed:
        changed = False
        for n in nodes:
            if n == root:
                continue
            new = set(nodes) if not preds[n] else set.intersection(*(dom[p] for p in preds[n]))
            new |= {n}
            if new != dom[n]:
                dom[n] = new
                changed = True
    return dom


class TestSeseIntervals:
    """Each gateway pairs with exactly one same-kind partner such that the
    fragment entry dominates the exit and the exit postdominates the entry,
    and the resulting regions nest."""

    def pairs_of(self, model):
        from pragmos.verification import back_edges

        nodes = [n.id for n in model.nodes]
        dom = _dominators(nodes, model.flows, model.entry, forward=True)
        postdom = _dominators(nodes, model.flows, model.exit, forward=False)
        gateways = [n for n in model.nodes if n.kind.endswith("_gateway")]
        backs = {model.flows[i] for i in back_edges(model)}
        back_targets = {b for _, b in backs}

        def innermost(entry, candidates):
            fits = [
                g
                for g in candidates
                if g.id != entry.id
                and entry.id in dom[g.id]
                and g.id in postdom[entry.id]
            ]
            fits.sort(key=lambda g: len(dom[g.id]))
            return fits[0] if fits else None

        def region(entry_id, exit_id):
            return {
                n.id
                for n in model.nodes
                if entry_id in dom[n.id] and exit_id in postdom[n.id]
            }

        pairs = []
        taken = set()
        # loop fragments first: their entry is a join fed by a back edge and
        # their exit is the innermost split whose region contains the back
        # edge sources
        for entry in gateways:
            if entry.gateway_role == "join" and entry.id in back_targets:
                sources = {a for a, b in backs if b == entry.id}
                splits = [
                    g
                    for g in gateways
                    if g.gateway_role == "split"
                    and g.id not in taken
                    and sources <= region(entry.id, g.id)
                ]
                exit_ = innermost(entry, splits)
                assert exit_ is not None, f"loop entry {entry.id} has no exit"
                pairs.append((entry.id, exit_.id))
                taken.update({entry.id, exit_.id})
        # remaining splits open blocks closed by a same-kind join
        for entry in gateways:
            if entry.gateway_role == "split" and entry.id not in taken:
                joins = [
                    g
                    for g in gateways
                    if g.gateway_role == "join" and g.kind == entry.kind and g.id not in taken
                ]
                exit_ = innermost(entry, joins)
                assert exit_ is not None, f"split {entry.id} has no matching join"
                pairs.append((entry.id, exit_.id))
                taken.update({entry.id, exit_.id})
        return dom, postdom, gateways, pairs

    @pytest.mark.parametrize(
        "builder",
        [
            lambda: build(cases.CAR_PATHS)[2],
            lambda: build(cases.BICYCLE_PATHS, cases.BICYCLE_CONCURRENCY, cases.BICYCLE_LOOPS)[2],
            lambda: build(cases.EXAM_PATHS, loops=cases.EXAM_LOOPS)[2],
        ],
    )
    def test_gateways_pair_into_nested_regions(self, builder):
        model = builder()
        dom, postdom, gateways, pairs = self.pairs_of(model)
        paired = {g for pair in pairs for g in pair}
        assert len(paired) == len(gateways) == len(pairs) * 2

        def pair_region(entry, exit_):
            return frozenset(
                n.id
                for n in model.nodes
                if entry in dom[n.id] and exit_ in postdom[n.id]
            )

        regions = [pair_region(a, b) for a, b in pairs]
        for i, r1 in enumerate(regions):
            for r2 in regions[i + 1:]:
                assert r1 <= r2 or r2 <= r1 or not (r1 & r2)


class TestLoopShapes:
    def test_repeat_loop_requires_one_execution(self):
        _, _, model = build(cases.EXAM_PATHS, loops=cases.EXAM_LOOPS)
        traces0 = enumerate_traces(model, 0)
        assert (cases.EX_A, cases.EX_B, cases.EX_C, cases.EX_D, cases.EX_E, cases.EX_F) in traces0
        assert (cases.EX_A, cases.EX_B, cases.EX_C, cases.EX_F) not in traces0

    def test_while_reference_admits_zero_iterations(self):
        model = cases.exam_while_model()
        traces0 = enumerate_traces(model, 0)
        assert (cases.EX_A, cases.EX_B, cases.EX_C, cases.EX_F) in traces0

    def test_models_stay_sound(self):
        for paths, conc, loops in [
            (cases.CAR_PATHS, None, None),
            (cases.BICYCLE_PATHS, cases.BICYCLE_CONCURRENCY, cases.BICYCLE_LOOPS),
            (cases.EXAM_PATHS, None, cases.EXAM_LOOPS),
        ]:
            _, _, model = build(paths, conc, loops)
            assert check_soundness(model).sound
