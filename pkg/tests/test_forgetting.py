"""Buoyancy scoring, the measure ladder, condensation, stale merging, tidy-up."""

from datetime import datetime, timedelta, timezone

import pytest

from contextdesk.contexts import ContextManager, CtxState, Membership, Origin
from contextdesk.errors import ClockSkew, CtxIsCurrent
from contextdesk.forgetting import (
    ForgettingEngine,
    ForgettingPolicy,
    Measure,
    classify_measure,
    memory_buoyancy,
)
from contextdesk.graph import GraphStore, NodeKind

T0 = datetime(2026, 1, 1, 9, 0, 0, tzinfo=timezone.utc)


def days(n):
    return T0 + timedelta(days=n)


def mk_membership(strength=1.0, last_access=T0, pinned=False):
    return Membership(
        edge_id="e",
        ctx="c",
        item="i",
        strength=strength,
        origin=Origin.USER,
        created_at=T0,
        last_access_at=last_access,
        pinned=pinned,
        measure="KEEP",
    )


@pytest.fixture
def rig():
    store = GraphStore()
    cm = ContextManager(store)
    engine = ForgettingEngine(store, cm)
    return store, cm, engine


def add_file(cm, name):
    return cm.store.add_node(NodeKind.FILE, {"name": name, "created_at": T0.isoformat()}, T0).id


# -- memory buoyancy ----------------------------------------------------


def test_mb_no_decay_at_access_time():
    policy = ForgettingPolicy()
    assert memory_buoyancy(mk_membership(1.0), T0, policy) == 1.0


def test_mb_half_life_definition():
    policy = ForgettingPolicy(half_life_days=30)
    assert memory_buoyancy(mk_membership(1.0), days(30), policy) == pytest.approx(0.5)


def test_mb_two_half_lives():
    # 0.8 * 2^-2 = 0.2, frozen by hand
    policy = ForgettingPolicy(half_life_days=30)
    assert memory_buoyancy(mk_membership(0.8), days(60), policy) == pytest.approx(0.2)


def test_mb_clock_skew():
    with pytest.raises(ClockSkew):
        memory_buoyancy(mk_membership(1.0, last_access=days(1)), T0, ForgettingPolicy())


def test_mb_strictly_decreasing_and_bounded():
    policy = ForgettingPolicy()
    m = mk_membership(0.7)
    previous = None
    for day in range(0, 400, 7):
        mb = memory_buoyancy(m, days(day), policy)
        assert mb <= m.strength
        if previous is not None:
            assert mb < previous
        previous = mb


# -- classify ------------------------------------------------------------


def test_classify_keep():
    assert classify_measure(1.0, ForgettingPolicy(), False) == Measure.KEEP


def test_classify_condense_band():
    # 0.1 <= 0.15 < 0.2
    assert classify_measure(0.15, ForgettingPolicy(), False) == Measure.CONDENSE


def test_classify_delete_downgraded_by_policy():
    assert classify_measure(0.01, ForgettingPolicy(allow_delete=False), False) == Measure.ARCHIVE
    assert classify_measure(0.01, ForgettingPolicy(allow_delete=True), False) == Measure.DELETE


def test_classify_pinned_always_keep():
    for mb in (0.0, 0.01, 0.3, 0.9):
        assert classify_measure(mb, ForgettingPolicy(allow_delete=True), True) == Measure.KEEP


def test_classify_monotone_severity():
    policy = ForgettingPolicy()
    grid = [i / 200 for i in range(201)]
    measures = [classify_measure(mb, policy, False) for mb in grid]
    for earlier, later in zip(measures, measures[1:]):
        assert earlier >= later  # lower mb never gets a milder measure


# -- context buoyancy ------------------------------------------------------


def test_context_buoyancy_just_switched(rig):
    _, cm, engine = rig
    c = cm.create_context("C", None, T0)
    cm.set_current(c, T0)
    assert engine.context_buoyancy(c, T0) == pytest.approx(1.0)


def test_context_buoyancy_empty_stale(rig):
    _, cm, engine = rig
    c = cm.create_context("C", None, T0)
    # 60 days at half-life 30 -> 2^-2
    assert engine.context_buoyancy(c, days(60)) == pytest.approx(0.25)


def test_context_buoyancy_fresh_item_dominates(rig):
    _, cm, engine = rig
    c = cm.create_context("C", None, T0)
    f = add_file(cm, "f")
    cm.add_item(c, f, 1.0, Origin.USER, days(59))
    mb = memory_buoyancy(cm.membership(c, f), days(60), engine.policy)
    assert engine.context_buoyancy(c, days(60)) >= mb


# -- condensation ------------------------------------------------------------


def test_condense_fewer_than_k_keeps_all(rig):
    store, cm, engine = rig
    c = cm.create_context("C", None, T0)
    for i in range(3):
        cm.add_item(c, add_file(cm, f"f{i}"), 1.0, Origin.USER, T0)
    stub = engine.condense_context(c, days(1))
    assert engine.stub_removed_items(stub) == []
    assert len(cm.memberships_of(c)) == 3
    assert cm.state(c) == CtxState.CONDENSED


def test_condense_keeps_pinned_plus_topk(rig):
    store, cm, engine = rig
    policy = ForgettingPolicy(keep_top_k=1)
    c = cm.create_context("meeting", None, T0)
    report = add_file(cm, "report.pdf")
    slides = add_file(cm, "slides.ppt")
    train = add_file(cm, "train.txt")
    cm.add_item(c, report, 1.0, Origin.USER, T0, pinned=True)
    cm.add_item(c, slides, 1.0, Origin.USER, T0)   # fresher -> higher MB
    cm.add_item(c, train, 0.3, Origin.USER, T0)    # weak -> lower MB
    stub = engine.condense_context(c, days(40), policy)
    kept = {m.item for m in cm.memberships_of(c)}
    assert kept == {report, slides}
    assert engine.stub_removed_items(stub) == [train]


def test_condense_tie_keeps_lower_item_id(rig):
    store, cm, engine = rig
    policy = ForgettingPolicy(keep_top_k=1)
    c = cm.create_context("C", None, T0)
    a = add_file(cm, "a")
    b = add_file(cm, "b")
    # identical strength and access time -> identical MB
    cm.add_item(c, a, 0.5, Origin.USER, T0)
    cm.add_item(c, b, 0.5, Origin.USER, T0)
    engine.condense_context(c, days(10), policy)
    kept = {m.item for m in cm.memberships_of(c)}
    assert kept == {min(a, b)}


def test_condense_conserves_member_count(rig):
    store, cm, engine = rig
    policy = ForgettingPolicy(keep_top_k=2)
    c = cm.create_context("C", None, T0)
    items = [add_file(cm, f"f{i}") for i in range(7)]
    for f in items:
        cm.add_item(c, f, 0.4, Origin.USER, T0)
    before = len(cm.memberships_of(c))
    stub = engine.condense_context(c, days(5), policy)
    assert len(cm.memberships_of(c)) + len(engine.stub_removed_items(stub)) == before


def test_condense_current_rejected(rig):
    _, cm, engine = rig
    c = cm.create_context("C", None, T0)
    cm.set_current(c, T0)
    with pytest.raises(CtxIsCurrent):
        engine.condense_context(c, days(1))


# -- merge_stale ---------------------------------------------------------------


def test_merge_stale_all_fresh(rig):
    _, cm, engine = rig
    xy = cm.create_context("XY", None, T0)
    cm.create_context("m1", xy, T0)
    assert engine.merge_stale(T0) == []


def test_merge_stale_consulting_three_years(rig):
    _, cm, engine = rig
    xy = cm.create_context("XY", None, T0)
    subs = [cm.create_context(f"m{i}", xy, T0) for i in range(5)]
    # 2^(-1095/30) ~ 1e-11, far below the 0.2 condense threshold
    merges = engine.merge_stale(days(1095))
    assert sorted(src for src, _ in merges) == sorted(subs)
    assert all(dst == xy for _, dst in merges)
    for sub in subs:
        assert cm.state(sub) == CtxState.RETRACTED


def test_merge_stale_depth_order(rig):
    _, cm, engine = rig
    root = cm.create_context("root", None, T0)
    child = cm.create_context("child", root, T0)
    grand = cm.create_context("grand", child, T0)
    merges = engine.merge_stale(days(400))
    assert merges == [(grand, child), (child, root)]
    assert cm.memberships_of(root) == []
    assert cm.is_forest()


# -- tidy_up ----------------------------------------------------------------------


def test_tidy_up_all_fresh_empty_report(rig):
    _, cm, engine = rig
    c = cm.create_context("C", None, T0)
    for i in range(3):
        cm.add_item(c, add_file(cm, f"f{i}"), 1.0, Origin.USER, T0)
    report = engine.tidy_up(T0)
    assert report.actions == []


def test_tidy_up_idempotent(rig):
    _, cm, engine = rig
    desk = cm.create_context("desk", None, T0)
    cm.set_current(desk, T0)
    c = cm.create_context("C", None, T0)
    for i in range(4):
        cm.add_item(c, add_file(cm, f"f{i}"), 0.8, Origin.USER, T0)
    first = engine.tidy_up(days(90))
    assert first.actions != []
    second = engine.tidy_up(days(90))
    assert second.actions == []


def test_tidy_up_consulting_200_days(rig):
    """train-schedule at strength 0.3 untouched for 200 days -> ARCHIVE."""
    _, cm, engine = rig
    desk = cm.create_context("desk", None, T0)
    cm.set_current(desk, T0)
    c = cm.create_context("meeting-1", None, T0)
    train = add_file(cm, "train-schedule.txt")
    cm.add_item(c, train, 0.3, Origin.USER, T0)
    # frozen closed form: 0.3 * 2^(-200/30) = 0.0029529399606911086
    mb = memory_buoyancy(cm.membership(c, train), days(200), engine.policy)
    assert mb == pytest.approx(0.0029529399606911086)
    engine.tidy_up(days(200))
    item_memberships = cm.memberships_of_item(train)
    assert item_memberships and all(m.measure == "ARCHIVE" for m in item_memberships)


def test_tidy_up_never_deletes_when_disallowed(rig):
    store, cm, engine = rig
    desk = cm.create_context("desk", None, T0)
    cm.set_current(desk, T0)
    c = cm.create_context("C", None, T0)
    items = [add_file(cm, f"f{i}") for i in range(5)]
    for f in items:
        cm.add_item(c, f, 0.2, Origin.USER, T0)
    report = engine.tidy_up(days(800))
    assert all(a.new != "DELETE" for a in report.actions)
    for f in items:
        assert store.has_node(f)


def test_tidy_up_delete_double_gate(rig):
    store, cm, engine = rig
    engine.policy = ForgettingPolicy(allow_delete=True, min_retention_days=365)
    desk = cm.create_context("desk", None, T0)
    cm.set_current(desk, T0)
    c = cm.create_context("C", None, T0)
    young = add_file(cm, "young")
    cm.add_item(c, young, 0.3, Origin.USER, T0)
    # way past the delete band but younger than min retention -> archived
    engine.tidy_up(days(300))
    assert store.has_node(young)
    assert cm.membership(c, young).measure == "ARCHIVE"
    # past min retention -> deleted
    report = engine.tidy_up(days(400))
    assert not store.has_node(young)
    assert any(a.kind == "delete" and a.item == young for a in report.actions)


def test_tidy_up_current_context_exempt(rig):
    _, cm, engine = rig
    c = cm.create_context("C", None, T0)
    f = add_file(cm, "f")
    cm.add_item(c, f, 0.3, Origin.USER, T0)
    cm.set_current(c, T0)
    report = engine.tidy_up(days(500))
    assert all(a.ctx != c for a in report.actions)
    assert cm.membership(c, f).measure == "KEEP"


def test_tidy_up_majority_condensation(rig):
    store, cm, engine = rig
    desk = cm.create_context("desk", None, T0)
    cm.set_current(desk, T0)
    c = cm.create_context("C", None, T0)
    stale = [add_file(cm, f"old{i}") for i in range(6)]
    for f in stale:
        cm.add_item(c, f, 0.4, Origin.USER, T0)
    fresh = add_file(cm, "fresh")
    cm.add_item(c, fresh, 1.0, Origin.USER, days(100))
    report = engine.tidy_up(days(100))
    # 6 of 7 members in the condense-or-worse band -> context condenses
    assert cm.state(c) == CtxState.CONDENSED
    assert any(a.kind == "condense" and a.ctx == c for a in report.actions)
    kept = {m.item for m in cm.memberships_of(c)}
    assert fresh in kept
    assert len(kept) == engine.policy.keep_top_k  # nothing pinned: top-k survive


def test_tidy_up_archive_moves_content(tmp_path):
    from contextdesk.content import ArchiveStore, ContentStore

    store = GraphStore()
    cm = ContextManager(store)
    content = ContentStore(tmp_path / "content")
    archive = ArchiveStore(tmp_path / "archive", tmp_path / "archive.index")
    engine = ForgettingEngine(store, cm, content=content, archive=archive)

    desk = cm.create_context("desk", None, T0)
    cm.set_current(desk, T0)
    c = cm.create_context("C", None, T0)
    ref = content.put(b"hello archive")
    f = store.add_node(NodeKind.FILE, {"name": "f.txt", "created_at": T0.isoformat(), "content_ref": ref}, T0).id
    cm.add_item(c, f, 0.3, Origin.USER, T0)
    engine.tidy_up(days(200))
    assert cm.membership(c, f).measure == "ARCHIVE"
    assert not content.has(ref)
    assert archive.has(ref)
    assert "archived" in (tmp_path / "archive.index").read_text()
