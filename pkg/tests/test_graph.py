"""Graph core: mutations, event log, snapshots, recovery."""

import json
import random
from datetime import datetime, timedelta, timezone

import pytest

from contextdesk.errors import CorruptRecord, GapInLog, InvariantViolation, UnknownIdError
from contextdesk.graph import (
    DurableStore,
    EventLog,
    EventRecord,
    EdgeLabel,
    GraphStore,
    NodeKind,
    recover,
)

T0 = datetime(2026, 1, 1, 9, 0, 0, tzinfo=timezone.utc)


def at(minutes=0):
    return T0 + timedelta(minutes=minutes)


class NaiveGraph:
    """Independent oracle: a plain fold over the mutation list.

    Deliberately dumb -- dict-of-dicts, full scans, no indexes -- so it
    shares no code with GraphStore.
    """

    def __init__(self):
        self.nodes = {}
        self.edges = {}

    def apply(self, op, payload):
        if op == "add-node":
            assert payload["id"] not in self.nodes
            self.nodes[payload["id"]] = {
                "kind": payload["kind"],
                "attrs": dict(payload.get("attrs", {})),
            }
        elif op == "set-node-attrs":
            entry = self.nodes[payload["id"]]
            entry["attrs"].update(payload.get("set", {}))
            for key in payload.get("unset", []):
                entry["attrs"].pop(key, None)
        elif op == "remove-node":
            del self.nodes[payload["id"]]
            self.edges = {
                eid: e
                for eid, e in self.edges.items()
                if e["src"] != payload["id"] and e["dst"] != payload["id"]
            }
        elif op == "add-edge":
            assert payload["src"] in self.nodes and payload["dst"] in self.nodes
            self.edges[payload["id"]] = {
                "src": payload["src"],
                "label": payload["label"],
                "dst": payload["dst"],
                "attrs": dict(payload.get("attrs", {})),
            }
        elif op == "set-edge-attrs":
            entry = self.edges[payload["id"]]
            entry["attrs"].update(payload.get("set", {}))
            for key in payload.get("unset", []):
                entry["attrs"].pop(key, None)
        elif op == "remove-edge":
            del self.edges[payload["id"]]
        else:
            raise AssertionError(op)


def random_mutations(rng, count, id_prefix="n"):
    """Generate a list of (op, payload) always valid at application time."""
    muts = []
    nodes = []
    live_edges = {}  # eid -> (src, dst)
    kinds = [k.value for k in NodeKind]
    labels = [l.value for l in EdgeLabel]
    serial = 0
    for _ in range(count):
        choices = ["add-node"]
        if nodes:
            choices += ["set-node-attrs", "add-node", "add-node"]
        if len(nodes) >= 2:
            choices.append("add-edge")
        if live_edges:
            choices += ["set-edge-attrs", "remove-edge"]
        if nodes and rng.random() < 0.05:
            choices.append("remove-node")
        op = rng.choice(choices)
        serial += 1
        if op == "add-node":
            nid = f"{id_prefix}{serial:06d}"
            nodes.append(nid)
            muts.append(("add-node", {"id": nid, "kind": rng.choice(kinds), "attrs": {"name": f"x{serial}"}}))
        elif op == "set-node-attrs":
            muts.append(("set-node-attrs", {"id": rng.choice(nodes), "set": {"touched": serial}}))
        elif op == "add-edge":
            eid = f"e{serial:06d}"
            src, dst = rng.choice(nodes), rng.choice(nodes)
            live_edges[eid] = (src, dst)
            muts.append(
                ("add-edge", {"id": eid, "src": src, "label": rng.choice(labels), "dst": dst, "attrs": {}})
            )
        elif op == "set-edge-attrs":
            muts.append(("set-edge-attrs", {"id": rng.choice(sorted(live_edges)), "set": {"w": rng.random()}}))
        elif op == "remove-edge":
            victim = rng.choice(sorted(live_edges))
            del live_edges[victim]
            muts.append(("remove-edge", {"id": victim}))
        elif op == "remove-node":
            victim = rng.choice(nodes)
            nodes.remove(victim)
            live_edges = {e: sd for e, sd in live_edges.items() if victim not in sd}
            muts.append(("remove-node", {"id": victim}))
    return muts


def test_first_mutation_on_empty_store():
    store = GraphStore()
    record = store.apply("add-node", {"id": "n1", "kind": "CONTEXT", "attrs": {"name": "XY"}}, at())
    assert len(store.nodes) == 1
    assert record.seq == 1


def test_add_edge_unknown_dst():
    store = GraphStore()
    store.apply("add-node", {"id": "n1", "kind": "FILE", "attrs": {}}, at())
    with pytest.raises(UnknownIdError):
        store.apply("add-edge", {"id": "e1", "src": "n1", "label": "isRelatedTo", "dst": "nope", "attrs": {}}, at())


def test_duplicate_edge_id_rejected():
    store = GraphStore()
    store.apply("add-node", {"id": "a", "kind": "FILE", "attrs": {}}, at())
    store.apply("add-node", {"id": "b", "kind": "FILE", "attrs": {}}, at())
    payload = {"id": "e1", "src": "a", "label": "isRelatedTo", "dst": "b", "attrs": {}}
    store.apply("add-edge", payload, at())
    with pytest.raises(InvariantViolation):
        store.apply("add-edge", payload, at())


def test_1000_random_mutations_match_naive_oracle():
    rng = random.Random(42)
    muts = random_mutations(rng, 1000)
    store = GraphStore()
    oracle = NaiveGraph()
    for i, (op, payload) in enumerate(muts):
        store.apply(op, payload, at(i))
        oracle.apply(op, payload)
    assert len(store.nodes) == len(oracle.nodes)
    assert len(store.edges) == len(oracle.edges)
    assert {i: n.to_dict()["attrs"] for i, n in store.nodes.items()} == {
        i: n["attrs"] for i, n in oracle.nodes.items()
    }
    assert set(store.edges) == set(oracle.edges)


def test_seq_strictly_increasing_no_gaps():
    store = GraphStore()
    for i in range(50):
        store.apply("add-node", {"id": f"n{i}", "kind": "NOTE", "attrs": {}}, at(i))
    seqs = [r.seq for r in store.log.records]
    assert seqs == list(range(1, 51))


def test_no_dangling_edges_after_node_removal():
    store = GraphStore()
    store.apply("add-node", {"id": "a", "kind": "FILE", "attrs": {}}, at())
    store.apply("add-node", {"id": "b", "kind": "FILE", "attrs": {}}, at())
    store.apply("add-edge", {"id": "e1", "src": "a", "label": "isRelatedTo", "dst": "b", "attrs": {}}, at())
    store.apply("remove-node", {"id": "b"}, at())
    for edge in store.edges.values():
        assert edge.src in store.nodes and edge.dst in store.nodes
    assert "e1" not in store.edges


# -- neighbors ---------------------------------------------------------


def build_ctx_with_items():
    store = GraphStore()
    store.apply("add-node", {"id": "c1", "kind": "CONTEXT", "attrs": {"name": "C"}}, at())
    for nid in ("i3", "i1", "i2"):
        store.apply("add-node", {"id": nid, "kind": "FILE", "attrs": {}}, at())
        store.apply(
            "add-edge",
            {"id": f"e-{nid}", "src": "c1", "label": "containsItem", "dst": nid, "attrs": {}},
            at(),
        )
    return store


def test_neighbors_isolated_node():
    store = GraphStore()
    store.apply("add-node", {"id": "x", "kind": "NOTE", "attrs": {}}, at())
    assert store.neighbors("x", direction="any") == []


def test_neighbors_sorted_by_label():
    store = build_ctx_with_items()
    # oracle: enumerate the three edges by hand
    assert store.neighbors("c1", EdgeLabel.containsItem, "out") == ["i1", "i2", "i3"]


def test_neighbors_label_omitted_union_no_dupes():
    store = build_ctx_with_items()
    store.apply("add-edge", {"id": "e-rel", "src": "c1", "label": "isRelatedTo", "dst": "i1", "attrs": {}}, at())
    # brute force over the edge list
    expected = sorted({e.dst for e in store.edges.values() if e.src == "c1"})
    got = store.neighbors("c1", None, "out")
    assert got == expected
    assert len(got) == len(set(got))


def test_neighbors_unknown_node():
    store = GraphStore()
    with pytest.raises(UnknownIdError):
        store.neighbors("ghost")


def test_neighbors_deterministic():
    store = build_ctx_with_items()
    first = store.neighbors("c1", EdgeLabel.containsItem, "out")
    for _ in range(5):
        assert store.neighbors("c1", EdgeLabel.containsItem, "out") == first


# -- snapshot / recover ------------------------------------------------


def test_empty_snapshot_empty_log():
    store = recover(None, [])
    assert store.nodes == {} and store.edges == {} and store.seq == 0


def test_snapshot_of_empty_graph():
    store = GraphStore()
    snap = store.snapshot()
    assert snap == {"seq": 0, "nodes": [], "edges": []}


def test_snapshot_roundtrip_byte_identical():
    rng = random.Random(7)
    store = GraphStore()
    for i, (op, payload) in enumerate(random_mutations(rng, 200)):
        store.apply(op, payload, at(i))
    snap1 = json.dumps(store.snapshot(), sort_keys=True)
    restored = recover(store.snapshot(), [])
    snap2 = json.dumps(restored.snapshot(), sort_keys=True)
    assert snap1 == snap2


def test_recover_equals_full_replay_for_all_k():
    """Event-sourcing property over every snapshot point of one sequence."""
    rng = random.Random(99)
    muts = random_mutations(rng, 120)
    full = GraphStore()
    records = []
    for i, (op, payload) in enumerate(muts):
        records.append(full.apply(op, payload, at(i)))
    for k in range(0, len(muts) + 1, 10):
        upto_k = GraphStore()
        for op, payload in muts[:k]:
            upto_k.apply(op, payload, at(0))
        rebuilt = recover(upto_k.snapshot(), records[k:])
        assert rebuilt.same_state(full), f"divergence at k={k}"
        assert rebuilt.seq == full.seq


def test_gap_in_log_detected():
    store = GraphStore()
    r = [
        store.apply("add-node", {"id": f"n{i}", "kind": "NOTE", "attrs": {}}, at(i))
        for i in range(7)
    ]
    with pytest.raises(GapInLog):
        recover(None, [r[0], r[1], r[2], r[3], r[4], r[6]])  # seq jump 5 -> 7


def test_corrupt_record_detected():
    with pytest.raises(CorruptRecord):
        EventRecord.from_json('{"seq": 1, "ts": "x"')  # truncated JSON
    with pytest.raises(CorruptRecord):
        EventRecord.from_json('{"ts": "x", "op": "add-node"}')  # missing seq


def test_midsession_snapshot_plus_tail_replays(tmp_path):
    from contextdesk.graph import read_all_records

    store = DurableStore(tmp_path / "store", snapshot_interval=None)
    for i in range(10):
        store.add_node(NodeKind.NOTE, {"name": f"note-{i}"}, at(i))
    store.write_snapshot()  # seals the first 10 events into a segment
    for i in range(10, 15):
        store.add_node(NodeKind.NOTE, {"name": f"note-{i}"}, at(i))
    store.store.log.close()

    reopened = DurableStore(tmp_path / "store", snapshot_interval=None)
    replay_all = recover(None, list(read_all_records(tmp_path / "store")))
    assert reopened.store.same_state(replay_all)
    assert reopened.seq == 15
    assert list(tmp_path.glob("store/events-*.log"))  # history retained


def test_durable_auto_snapshot(tmp_path):
    store = DurableStore(tmp_path / "s", snapshot_interval=5)
    for i in range(12):
        store.add_node(NodeKind.NOTE, {}, at(i))
    snap = json.loads((tmp_path / "s" / "snapshot.json").read_text())
    assert snap["seq"] >= 10


def test_id_generator_sortable_and_stable_across_recovery(tmp_path):
    store = DurableStore(tmp_path / "s", snapshot_interval=None)
    ids = [store.add_node(NodeKind.FILE, {}, at(i)).id for i in range(5)]
    assert ids == sorted(ids)
    store.close()
    reopened = DurableStore(tmp_path / "s", snapshot_interval=None)
    fresh = reopened.add_node(NodeKind.FILE, {}, at(9)).id
    assert fresh not in ids
    assert all(fresh > old for old in ids)
