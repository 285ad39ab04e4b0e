import itertools
import json

import pytest

from rscount.alphamap import StructureMode, count_by_enumeration, count_closed_form
from rscount.counter import count_models
from rscount.errors import ConfigError, EncodingError, GenerationError, KnowledgeError
from rscount.formula import parse_dimacs
from rscount.knowledge import knowledge_from_function
from rscount.tasks import Family, TaskSpec, builtin_task, parse_config, parse_task_name
from rscount.tasks.boia import ACTIONS, CONCEPTS
from rscount.tasks.builtin import kand_knowledge
from rscount.tasks.generate import dataset_to_json, export_knowledge_dimacs, generate_dataset, split_sizes

MNLOGIC_CFG = """\
n_digits: 3
xor_rule: False
symbols:
  - a
  - b
  - c
logic:
    Or(And(a, b), Not(c))
use_mnist: True
"""

MNMATH_CFG = """\
num_digits: 2
symbols:
  - a
  - b
logic:
  - 2*a + b
  - a + b
"""


# --- builtin knowledge --------------------------------------------------------


def test_mnlogic_xor_is_parity():
    t = builtin_task(TaskSpec(Family.MNLOGIC, {"k": 3, "preset": "xor"}))
    assert (t.space.k, t.space.b) == (3, 2)
    for c in itertools.product([0, 1], repeat=3):
        assert t.knowledge.label_of(c) == (sum(c) % 2,)
    assert t.support.is_exhaustive


def test_mnadd_sum():
    t = builtin_task(TaskSpec(Family.MNADD, {"digits": 2, "b": 10}))
    assert t.knowledge.label_of((3, 4)) == (7,)
    assert len(t.support) == 100


def test_mnadd_half_support():
    t = builtin_task(TaskSpec(Family.MNADD_HALF, {}))
    assert len(t.support) == 25
    assert all(max(c) <= 4 for c in t.support)
    t = builtin_task(TaskSpec(Family.MNADD_HALF, {"combinations": [(0, 1), (2, 3)]}))
    assert list(t.support) == [(0, 1), (2, 3)]


def test_mnadd_evenodd_support_and_shortcuts():
    t = builtin_task(TaskSpec(Family.MNADD_EVENODD, {}))
    assert len(t.support) == 50
    assert all(c[0] % 2 == c[1] % 2 for c in t.support)
    small = builtin_task(parse_task_name("mnadd-evenodd:b=4"))
    assert count_by_enumeration(small.knowledge, small.support, StructureMode.PERMUTATION) > 1
    assert count_closed_form(t.knowledge, t.support) > 1


def test_mnmath_systems():
    t = builtin_task(TaskSpec(Family.MNMATH, {}))
    assert t.knowledge.label_of((2, 2, 3, 4)) == (6, 7)
    ind = builtin_task(TaskSpec(Family.MNMATH, {"variant": "indicator", "digit_values": [0, 1, 2]}))
    K = ind.knowledge
    assert K.label_of((1, 2, 2, 1, 2, 3, 3, 2)) == (1, 1)
    assert K.label_of((1, 2, 2, 2, 2, 3, 1, 2)) == (0, 0)
    assert len(ind.support) == 3**8


def test_kand_default_pattern():
    K = builtin_task(TaskSpec(Family.KAND, {})).knowledge
    assert K.space.k == 12 and K.space.b == 3
    assert K.concept_names[:2] == ("shape_1_1", "color_1_1")
    # each figure: three primitives of one color (different shapes)
    same_color = (0, 1, 1, 1, 2, 1) + (2, 0, 0, 0, 1, 0)
    assert K.label_of(same_color) == (1,)
    # figure 1 all same color, figure 2 all different colors and shapes not matching any rule
    mixed = (0, 1, 1, 1, 2, 1) + (0, 0, 0, 1, 1, 2)
    assert K.label_of(mixed) == (0,)


def test_kand_rejects_bad_params():
    with pytest.raises(KnowledgeError):
        kand_knowledge({"n_figures": 0})


def test_cle4evr_default_rule():
    t = builtin_task(TaskSpec(Family.CLE4EVR, {"n_objects": 3}))
    K = t.knowledge
    assert K.space.k == 6 and K.space.b == 9
    assert K.label_of((1, 2, 3, 4, 1, 2)) == (1,)
    assert K.label_of((1, 2, 1, 3, 2, 2)) == (0,)
    # colors only take 8 values
    assert all(c[0] < 8 for c in itertools.islice(t.support, 500))


def test_boia_rules():
    K = builtin_task(TaskSpec(Family.BOIA, {})).knowledge
    assert K.space.k == len(CONCEPTS) == 21
    assert K.label_names == ACTIONS
    c = [0] * 21
    c[CONCEPTS.index("green_light")] = 1
    assert K.label_of(c)[:2] == (1, 0)
    c[CONCEPTS.index("person")] = 1
    assert K.label_of(c)[:2] == (0, 1)
    c = [0] * 21
    for name in ("left_lane", "left_solid_line"):
        c[CONCEPTS.index(name)] = 1
    assert K.label_of(c)[2] == 0


def test_boia_emergency_variant():
    t = builtin_task(TaskSpec(Family.BOIA_OOD_EMERGENCY, {}))
    K = t.knowledge
    c = [0] * 22
    c[CONCEPTS.index("red_light")] = 1
    assert K.label_of(c)[:2] == (0, 1)
    c[-1] = 1  # emergency
    assert K.label_of(c)[:2] == (1, 0)
    assert len(t.support) == 2**21


def test_task_names():
    assert parse_task_name("xor-3") == TaskSpec(Family.MNLOGIC, {"preset": "xor", "k": 3})
    spec = parse_task_name("lcnf-3-4-2-9")
    assert spec.params == {"k": 3, "clauses": 4, "width": 2, "seed": 9}
    spec = parse_task_name("mnadd:digits=2,b=4,digit_values=0/2")
    assert spec.params == {"digits": 2, "b": 4, "digit_values": [0, 2]}
    with pytest.raises(KnowledgeError):
        parse_task_name("unknown")
    with pytest.raises(KnowledgeError):
        builtin_task(parse_task_name("lcnf-2-1-3-0"))
    with pytest.raises(KnowledgeError):
        builtin_task(parse_task_name("mnadd:digit_values=12"))


def test_custom_cnf_knowledge():
    cnf = parse_dimacs("p cnf 3 2\n1 2 0\n-3 0\n")
    t = builtin_task(TaskSpec(Family.CUSTOM_CNF, {"cnf": cnf}))
    for c in itertools.product([0, 1], repeat=3):
        assert t.knowledge.label_of(c) == (int((c[0] or c[1]) and not c[2]),)


# --- configuration ---------------------------------------------------------------


def test_parse_mnlogic_config():
    cfg = parse_config(MNLOGIC_CFG)
    assert cfg.spec.family is Family.MNLOGIC
    assert cfg.spec.params["k"] == 3
    K = cfg.task().knowledge
    assert K.concept_names == ("a", "b", "c")
    for a, b, c in itertools.product([0, 1], repeat=3):
        assert K.label_of((a, b, c)) == (int((a and b) or not c),)
    assert (cfg.n_samples, cfg.val_prop, cfg.test_prop, cfg.prop_in_distribution) == (100, 0.2, 0.2, 1.0)


def test_parse_mnmath_config():
    cfg = parse_config(MNMATH_CFG)
    assert cfg.spec.family is Family.MNMATH
    K = cfg.task().knowledge
    assert K.label_of((2, 2)) == (6, 4)
    assert K.label_of((3, 4)) == (10, 7)
    assert len(cfg.spec.params["equations"]) == 2


def test_parse_relational_mnmath():
    cfg = parse_config("num_digits: 4\nsymbols: [a, b, c, d]\nlogic: ['Eq(a + b, c + d)']\n")
    K = cfg.task().knowledge
    assert K.label_of((1, 2, 3, 0)) == (1,)
    assert K.label_of((1, 2, 3, 1)) == (0,)


def test_tautology_rejected():
    text = "n_digits: 2\nxor_rule: false\nsymbols: [a, b]\nlogic: Or(a, Not(a))\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert "all true" in str(exc.value)
    assert exc.value.path == "logic"


def test_contradiction_rejected():
    text = "n_digits: 2\nxor_rule: false\nsymbols: [a, b]\nlogic: And(a, Not(a))\n"
    with pytest.raises(ConfigError, match="all false"):
        parse_config(text)


def test_degenerate_over_selected_combinations():
    text = "n_digits: 3\ncombinations_in_distribution: ['011', '101']\n"
    with pytest.raises(ConfigError, match="all false"):
        parse_config(text)


@pytest.mark.parametrize(
    "text, path",
    [
        ("n_digits: 3\nbogus: 1\n", "bogus"),
        ("n_digits: 3\nxor_rule: false\n", "logic"),
        ("n_digits: 2\nxor_rule: false\nsymbols: [a, b]\nlogic: Or(a, \n", "logic"),
        ("n_digits: 2\nxor_rule: false\nsymbols: [a, b]\nlogic: Or(a, z)\n", "logic"),
        ("n_digits: 2\nsymbols: [a]\n", "symbols"),
        ("n_digits: 2\nval_prop: 0.7\ntest_prop: 0.5\n", "val_prop"),
        ("n_digits: 2\nprop_in_distribution: 0\n", "prop_in_distribution"),
        ("n_digits: 2\ncombinations_in_distribution: ['0101']\n", "combinations_in_distribution[0]"),
        ("symbols: [a]\n", "task"),
        ("- 1\n- 2\n", "<root>"),
    ],
)
def test_config_errors_carry_key_path(text, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.path == path


def test_kand_config_with_aggregator():
    text = """\
n_shapes: 2
n_figures: 2
symbols: [shape_1, color_1, shape_2, color_2]
logic: Eq(color_1, color_2) & Ne(shape_1, shape_2)
aggregator_symbols: [p1, p2]
aggregator_logic: p1 | p2
"""
    K = parse_config(text).task().knowledge
    assert K.space.k == 8
    assert K.label_of((0, 1, 1, 1) + (0, 0, 0, 1)) == (1,)
    assert K.label_of((0, 1, 0, 1) + (0, 0, 0, 1)) == (0,)
    assert K.label_of((0, 1, 0, 1) + (2, 2, 1, 2)) == (1,)


def test_kand_combinations_by_name():
    text = """\
n_shapes: 1
n_figures: 2
logic: Eq(color_1, red)
combinations_in_distribution:
  - ["red, square", "red, circle"]
  - ["circle, yellow", "square, red"]
"""
    cfg = parse_config(text)
    # shapes square, circle, triangle; colors red, yellow, blue
    assert cfg.combinations_in_distribution == ((0, 0, 1, 0), (1, 1, 0, 0))


def test_cle4evr_config():
    text = """\
symbols: [color_1, shape_1, mat_1, size_1, color_2, shape_2, mat_2, size_2]
logic: |
    And(
      Eq(color_1, color_2),
      Eq(shape_1, shape_2),
      Eq(mat_1, mat_2),
      Eq(size_1, size_2)
    )
task: cle4evr
"""
    K = parse_config(text).task().knowledge
    assert K.space.k == 8
    assert K.label_of((1, 2, 0, 1, 1, 2, 0, 1)) == (1,)
    assert K.label_of((1, 2, 0, 1, 1, 2, 1, 1)) == (0,)


# --- generation ---------------------------------------------------------------


def test_default_split_sizes():
    cfg = parse_config(MNLOGIC_CFG)
    assert split_sizes(cfg) == {"train": 60, "val": 20, "test": 20, "ood": 0}
    ds = generate_dataset(cfg)
    assert ds.split_counts() == {"train": 60, "val": 20, "test": 20, "ood": 0}


def test_records_are_labelled_by_knowledge():
    cfg = parse_config(MNMATH_CFG + "n_samples: 80\nprop_in_distribution: 0.75\n")
    ds = generate_dataset(cfg)
    K = ds.knowledge
    assert all(K.label_of(r.concepts) == r.label for r in ds.records)
    assert ds.split_counts()["ood"] == 20


def test_xor_balance():
    cfg = parse_config("n_digits: 3\nn_samples: 200\n")
    ds = generate_dataset(cfg)
    pos = sum(r.label[0] for r in ds.records)
    assert abs(pos - 100) <= 1
    for split in ("train", "val", "test"):
        recs = ds.split(split)
        assert abs(2 * sum(r.label[0] for r in recs) - len(recs)) <= 1


def test_odd_sizes_stay_balanced():
    cfg = parse_config("n_digits: 4\nn_samples: 37\nval_prop: 0.13\ntest_prop: 0.29\nseed: 4\n")
    ds = generate_dataset(cfg)
    pos = sum(r.label[0] for r in ds.records)
    assert abs(2 * pos - 37) <= 1


def test_seed_determinism():
    a = dataset_to_json(generate_dataset(parse_config(MNLOGIC_CFG + "seed: 5\n")))
    b = dataset_to_json(generate_dataset(parse_config(MNLOGIC_CFG + "seed: 5\n")))
    c = dataset_to_json(generate_dataset(parse_config(MNLOGIC_CFG + "seed: 6\n")))
    assert a == b and a != c
    doc = json.loads(a)
    assert set(doc["records"][0]) == {"concepts", "label", "split"}


def test_combination_filter_respected():
    text = """\
n_digits: 4
combinations_in_distribution: ['0101', '0111', '1111', '0001']
prop_in_distribution: 0.7
n_samples: 60
"""
    cfg = parse_config(text)
    ds = generate_dataset(cfg)
    allowed = {(0, 1, 0, 1), (0, 1, 1, 1), (1, 1, 1, 1), (0, 0, 0, 1)}
    for r in ds.records:
        if r.split == "ood":
            assert r.concepts not in allowed
        else:
            assert r.concepts in allowed
    assert ds.split_counts()["ood"] == 18


def test_generation_error_without_both_sides():
    # filtered support where every candidate is negative
    from rscount.tasks.config import TaskConfig

    spec = TaskSpec(Family.MNLOGIC, {"k": 3, "preset": "and"})
    cfg = TaskConfig(spec, combinations_in_distribution=((0, 0, 0), (0, 1, 1)))
    with pytest.raises(GenerationError):
        generate_dataset(cfg)


def test_split_proportions_within_one():
    for n in (10, 33, 101):
        cfg = parse_config(f"n_digits: 3\nn_samples: {n}\nval_prop: 0.15\ntest_prop: 0.25\nprop_in_distribution: 0.9\n")
        sizes = generate_dataset(cfg).split_counts()
        n_in = n - sizes["ood"]
        assert abs(sizes["ood"] - n * 0.1) <= 1
        assert abs(sizes["val"] - n_in * 0.15) <= 1
        assert abs(sizes["test"] - n_in * 0.25) <= 1
        assert sum(sizes.values()) == n


# --- knowledge export --------------------------------------------------------


@pytest.mark.parametrize("name", ["xor-3", "and-3"])
def test_knowledge_dimacs_has_one_model_per_vector(name):
    K = builtin_task(parse_task_name(name)).knowledge
    text = export_knowledge_dimacs(K)
    assert count_models(parse_dimacs(text)).value == 8


def test_knowledge_dimacs_models_are_graph_of_beta():
    K = builtin_task(parse_task_name("mnadd:digits=2,b=3")).knowledge
    f = parse_dimacs(export_knowledge_dimacs(K))
    assert count_models(f).value == 9
    # pin each concept vector and its correct label: satisfiable; wrong label: not
    w = K.space.width
    for c in K.space.vectors():
        y = K.label_of(c)[0]
        pins = [(b + 1,) if bit else (-(b + 1),) for b, bit in enumerate(K.space.onehot(c))]
        for v in range(5):
            lab = (w + 1 + v,) if v == y else (-(w + 1 + v),)
            pins.append(lab)
        sat = type(f)(f.num_variables, f.clauses + tuple(pins))
        assert count_models(sat).value == 1


def test_knowledge_dimacs_needs_formula():
    from rscount.knowledge import ConceptSpace

    K = knowledge_from_function(ConceptSpace(2, 2), lambda c: (c[0],), [(0, 1)], with_formula=False)
    with pytest.raises(EncodingError):
        export_knowledge_dimacs(K)
