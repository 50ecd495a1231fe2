import hashlib
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plan2bn.bayes_net import posterior_by_enumeration
from plan2bn.compiler import CompileOptions, compile_library, dump_network
from plan2bn.plan_model import parse_plan_file
from plan2bn.recognition import (Observation, RecognitionError, new_session,
                                 read_observations)

from _golden import FIXTURES
from _sessions import HARD_POOL, max_gap, random_script, run_script


def obs(t, target, value=None, **kw):
    return Observation(t, target, value, **kw)


@pytest.fixture
def session(recon):
    return new_session(*recon)


# -- sessions -------------------------------------------------------------------

def test_prior_report(recon_lib, recon_overlay, session):
    # sensor leaves are barren without evidence, so the smaller network
    # without them has the same goal marginals and is cheap to enumerate
    net, _ = compile_library(recon_lib, recon_overlay,
                             CompileOptions(explicit_evidence_vars=False))
    rep = session.report()
    assert rep.t is None and rep.delta == {}
    assert list(rep.beliefs) == ["perform_bound", "dealt_with_enemy"]
    for goal, dist in rep.beliefs.items():
        assert dist == pytest.approx(posterior_by_enumeration(net, {}, goal), abs=1e-12)
    assert rep.beliefs["perform_bound"] == pytest.approx(
        {"Inactive": 0.6, "Active": 0.3, "Achieved": 0.1})


def test_empty_tracked_list(recon):
    s = new_session(*recon, tracked=[])
    assert s.report().beliefs == {}
    assert s.observe(obs(1, "ev_find_cover", "Performed")).beliefs == {}
    assert s.rank_goals() == []


def test_tracked_must_be_goals(recon):
    with pytest.raises(RecognitionError) as info:
        new_session(*recon, tracked=["find_cover"])
    assert info.value.code == "UNKNOWN_GOAL"
    with pytest.raises(RecognitionError):
        new_session(*recon, tracked=["no_such_goal"])


def test_tracked_accepts_goal_and_ka_names(recon):
    s = new_session(*recon, tracked=["!moved_to_next_viapt", "hide", "dealt_with_enemy"])
    assert s.tracked == ["perform_bound/0/moved_to_next_viapt", "hide",
                         "dealt_with_enemy"]


# -- observing --------------------------------------------------------------------

def test_bound_narrative(session):
    prior = session.report().beliefs["perform_bound"]["Active"]
    r1 = session.observe(obs(1, "moved_to_next_viapt", "Achieved"))
    assert r1.beliefs["perform_bound"]["Active"] > prior
    assert r1.argmax["perform_bound"] == "Active"
    assert r1.delta["perform_bound"]["Active"] == pytest.approx(
        r1.beliefs["perform_bound"]["Active"] - prior)
    r2 = session.observe(obs(2, "ev_find_cover", "Performed"))
    assert r2.argmax == {"perform_bound": "Achieved", "dealt_with_enemy": "Inactive"}
    assert [g for g, _ in session.rank_goals()] == ["perform_bound", "dealt_with_enemy"]
    assert len(session.history) == 2


def test_hide_narrative(recon):
    s = new_session(*recon, tracked=["hide"])
    s.observe(obs(1, "ev_move_into_foliage", "Performed"))
    rep = s.observe(obs(2, "enemy_detected", "True", all_candidates=True))
    d = rep.beliefs["hide"]
    assert d["Active"] + d["Achieved"] > d["Inactive"]


def test_fresh_ranking_favours_high_prior_goal(session):
    ranked = session.rank_goals()
    assert ranked[0][0] == "dealt_with_enemy"
    assert ranked[0][1] >= ranked[1][1]


def test_single_goal_ranking(recon):
    assert [g for g, _ in new_session(*recon, tracked=["hide"]).rank_goals()] == ["hide"]


def test_reports_are_normalized(session):
    for i, (target, values) in enumerate(HARD_POOL[:5], start=1):
        rep = session.observe(obs(i, target, values[0]))
        for dist in rep.beliefs.values():
            assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)


def test_uniform_likelihood_is_vacuous(session):
    before = session.report()
    rep = session.observe(Observation(
        1, ("ev_move_toward_viapt", "ev_move_into_foliage", "ev_move_behind_object"),
        likelihood=(0.3, 0.3)))
    assert max_gap(before, rep) < 1e-9


def test_soft_list_target(recon):
    s = new_session(*recon)
    for o in read_observations((FIXTURES / "ambiguous_move.obsl")):
        rep = s.observe(o)
    assert rep.argmax["perform_bound"] == "Active"


def test_context_false_rules_out_goal(recon):
    s = new_session(*recon, tracked=["hide", "engage_enemy"])
    rep = s.observe(obs(1, "hide/enemy_detected", "False"))
    assert rep.beliefs["hide"]["Active"] == 0.0
    assert rep.beliefs["hide"]["Achieved"] == 0.0
    assert rep.beliefs["engage_enemy"]["Active"] > 0.0


def test_network_untouched(recon, session):
    digest = hashlib.sha256(dump_network(*recon).encode()).hexdigest()
    session.observe(obs(1, "moved_to_next_viapt", "Achieved"))
    session.observe(obs(2, "ev_find_cover", "Performed"))
    session.retract(1)
    assert hashlib.sha256(dump_network(*recon).encode()).hexdigest() == digest


def test_order_insensitivity(recon):
    items = [("ev_find_cover", "Performed"), ("hide/enemy_detected", "True"),
             ("ev_aim_at_enemy", "NotPerformed"), ("moved_to_next_viapt", "Active")]
    finals = []
    for perm in itertools.permutations(items):
        s = new_session(*recon)
        for t, (target, value) in enumerate(perm, start=1):
            rep = s.observe(obs(t, target, value))
        finals.append(rep)
    assert max(max_gap(finals[0], f) for f in finals) < 1e-9


# -- errors -----------------------------------------------------------------------

@pytest.mark.parametrize("o, code", [
    (obs(1, "nothing_here", "Performed"), "UNKNOWN_TARGET"),
    (obs(1, "enemy_detected", "True"), "AMBIGUOUS_TARGET"),
    (obs(1, "ev_find_cover", "Achieved"), "BAD_VALUE"),
    (Observation(1, "ev_find_cover", likelihood=(1.0,)), "BAD_VALUE"),
    (Observation(1, "ev_find_cover", likelihood=(0.0, 0.0)), "BAD_VALUE"),
])
def test_bad_observations(session, o, code):
    with pytest.raises(RecognitionError) as info:
        session.observe(o)
    assert info.value.code == code
    assert session.history == []


def test_conflicting_hard_evidence(session):
    session.observe(obs(1, "ev_find_cover", "Performed"))
    with pytest.raises(RecognitionError) as info:
        session.observe(obs(2, "ev_find_cover", "NotPerformed"))
    assert info.value.code == "CONFLICTING_EVIDENCE"
    session.observe(obs(3, "ev_find_cover", "Performed"))  # agreeing repeat is fine


def test_stale_index(session):
    session.observe(obs(5, "ev_find_cover", "Performed"))
    for t in (5, 4):
        with pytest.raises(RecognitionError) as info:
            session.observe(obs(t, "ev_aim_at_enemy", "Performed"))
        assert info.value.code == "STALE_INDEX"
    session.retract(5)
    with pytest.raises(RecognitionError):
        session.observe(obs(5, "ev_aim_at_enemy", "Performed"))


def test_zero_probability_evidence(session):
    # an inhibited OR alternative cannot run alongside the first one
    session.observe(obs(1, "find_concealing_foliage", "Performed"))
    with pytest.raises(RecognitionError) as info:
        session.observe(obs(2, "find_concealing_object", "Performed"))
    assert info.value.code == "ZERO_PROBABILITY"
    assert len(session.history) == 1


def test_zero_probability_with_no_tracked_goals(recon):
    s = new_session(*recon, tracked=[])
    s.observe(obs(1, "find_concealing_foliage", "Performed"))
    with pytest.raises(RecognitionError) as info:
        s.observe(obs(2, "find_concealing_object", "Performed"))
    assert info.value.code == "ZERO_PROBABILITY"


# -- retraction -------------------------------------------------------------------

def test_retract_is_inverse(session):
    session.observe(obs(1, "moved_to_next_viapt", "Achieved"))
    before = session.report()
    session.observe(obs(2, "ev_find_cover", "Performed"))
    assert max_gap(before, session.retract(2)) < 1e-9
    assert max_gap(session.prior, session.retract(1)) < 1e-9
    assert session.history == []


def test_retract_unknown_index(session):
    with pytest.raises(RecognitionError) as info:
        session.retract(1)
    assert info.value.code == "UNKNOWN_INDEX"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_retraction_matches_replay(recon, seed):
    script = random_script(np.random.default_rng(seed), 8)
    session, replay = run_script(*recon, script)
    assert max_gap(session.report(), replay.report()) < 1e-9


# -- observation files ------------------------------------------------------------

def test_observation_round_trip():
    o = Observation(3, ("a", "b"), likelihood=(0.2, 0.8), all_candidates=True)
    assert Observation.from_dict(o.to_dict()) == o


@pytest.mark.parametrize("line", [
    '{"t": 1, "target": "x"}',
    '{"t": 1, "target": "x", "value": "a", "likelihood": [1, 1]}',
    '{"t": "1", "target": "x", "value": "a"}',
    '{"t": 1, "target": [], "value": "a"}',
    '{"t": 1, "target": "x", "value": "a", "colour": "red"}',
    'not json',
])
def test_bad_observation_lines(line):
    with pytest.raises(ValueError, match="line 2"):
        read_observations('{"t": 0, "target": "x", "value": "a"}\n' + line + "\n")


def test_read_observations_skips_blank_and_comment_lines():
    text = '\n// note\n{"t": 1, "target": "x", "value": "a"}\n\n'
    assert [o.t for o in read_observations(text)] == [1]


def test_table_output(session):
    table = session.observe(obs(1, "moved_to_next_viapt", "Achieved")).to_table()
    lines = table.splitlines()
    assert lines[0] == "t=1"
    assert lines[1].split() == ["goal", "Inactive", "Active", "Achieved", "argmax"]
    assert lines[2].split()[0] == "perform_bound" and lines[2].split()[-1] == "Active"


def test_private_network_sessions_are_independent():
    net, vmap = compile_library(parse_plan_file("ka k achieves !g context c { *a }"))
    a, b = new_session(net, vmap), new_session(net, vmap)
    a.observe(obs(1, "c", "False"))
    assert b.report().beliefs == b.prior.beliefs
    assert max_gap(b.prior, a.report()) > 0
