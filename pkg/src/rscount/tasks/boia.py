"""Driving-action knowledge over 21 binary scene concepts.

The rules are closed into biconditionals so every concept vector has exactly
one action vector: an action holds iff some enabling concept is present and
nothing blocks it, and ``stop`` excludes ``forward``. All rule tables live
here so the choice can be audited in one place.
"""

from __future__ import annotations

from ..formula import And, Atom, BoolExpr, Not, Or
from ..knowledge import ConceptSpace, Knowledge, knowledge_from_concept_exprs

CONCEPTS = (
    "red_light",
    "green_light",
    "car",
    "person",
    "rider",
    "other_obstacle",
    "follow",
    "stop_sign",
    "left_lane",
    "left_green_light",
    "left_follow",
    "no_left_lane",
    "left_obstacle",
    "left_solid_line",
    "right_lane",
    "right_green_light",
    "right_follow",
    "no_right_lane",
    "right_obstacle",
    "right_solid_line",
    "clear",
)
ACTIONS = ("forward", "stop", "left", "right")

OBSTACLES = ("car", "person", "rider", "other_obstacle")
STOP_CAUSES = ("red_light", "stop_sign") + OBSTACLES
FORWARD_CAUSES = ("green_light", "follow", "clear")
LEFT_CAUSES = ("left_lane", "left_green_light", "left_follow")
LEFT_BLOCKERS = ("no_left_lane", "left_obstacle", "left_solid_line")
RIGHT_CAUSES = ("right_lane", "right_green_light", "right_follow")
RIGHT_BLOCKERS = ("no_right_lane", "right_obstacle", "right_solid_line")

# under an emergency, lights, signs and lane markings stop binding
EMERGENCY_STOP_CAUSES = OBSTACLES
EMERGENCY_LEFT_BLOCKERS = ("no_left_lane", "left_obstacle")
EMERGENCY_RIGHT_BLOCKERS = ("no_right_lane", "right_obstacle")


def _any(index: dict[str, int], names) -> BoolExpr:
    return Or(*(Atom(index[n] + 1) for n in names))


def _turn(index, causes, blockers) -> BoolExpr:
    return And(_any(index, causes), Not(_any(index, blockers)))


def action_exprs(emergency: bool = False) -> tuple[tuple[str, ...], list[BoolExpr]]:
    """Concept names and one concept-level expression per action."""
    names = CONCEPTS + (("emergency",) if emergency else ())
    idx = {n: i for i, n in enumerate(names)}
    stop = _any(idx, STOP_CAUSES)
    forward = And(_any(idx, FORWARD_CAUSES), Not(stop))
    left = _turn(idx, LEFT_CAUSES, LEFT_BLOCKERS)
    right = _turn(idx, RIGHT_CAUSES, RIGHT_BLOCKERS)
    if emergency:
        em = Atom(idx["emergency"] + 1)
        stop_em = _any(idx, EMERGENCY_STOP_CAUSES)
        # an emergency vehicle may always proceed when the road is free
        forward_em = Not(stop_em)
        left_em = And(Not(_any(idx, EMERGENCY_LEFT_BLOCKERS)), _any(idx, LEFT_CAUSES))
        right_em = And(Not(_any(idx, EMERGENCY_RIGHT_BLOCKERS)), _any(idx, RIGHT_CAUSES))

        def switch(normal, alt):
            return Or(And(Not(em), normal), And(em, alt))

        stop, forward, left, right = (
            switch(stop, stop_em),
            switch(forward, forward_em),
            switch(left, left_em),
            switch(right, right_em),
        )
    return names, [forward, stop, left, right]


def boia_knowledge(emergency: bool = False) -> Knowledge:
    names, exprs = action_exprs(emergency)
    space = ConceptSpace(len(names), 2)
    return knowledge_from_concept_exprs(
        space,
        exprs,
        name="boia-ood" if emergency else "boia",
        concept_names=names,
        label_names=ACTIONS,
    )
