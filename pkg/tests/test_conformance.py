import itertools

from comodel import commands
from comodel.commands import Origin, parse
from comodel.conformance import (
    Mode,
    ViolationKind,
    check_conformance,
    conformance_mode,
    multiplicity_declarations,
    set_conformance_mode,
)
from comodel.editor import _BOOTSTRAP, CreateVerb, translate
from comodel.model import PhysicalModel
from conftest import REPLICA_B, stamp


def bootstrapped(start_stamp=1):
    m = PhysicalModel()
    counter = itertools.count(start_stamp)
    for cmd in _BOOTSTRAP:
        report = commands.apply(cmd, m, stamp(next(counter) * 10))
        assert report.status is commands.ApplyStatus.APPLIED, report
    return m, counter


def editor_create(m, counter, type_name, name):
    cmd = translate(CreateVerb(type_name, name), m)
    return commands.apply(cmd, m, stamp(next(counter) * 10))


class TestCheckConformance:
    def test_empty_model_has_no_violations(self):
        assert check_conformance(PhysicalModel()) == []

    def test_fresh_bootstrap_is_clean(self):
        m, _ = bootstrapped()
        assert check_conformance(m) == []

    def test_declarations_parsed_from_bootstrap(self):
        m, _ = bootstrapped()
        decls = {d.association: d for d in multiplicity_declarations(m)}
        assert decls["topic"].lower == 1 and decls["topic"].upper == 1
        assert decls["topic"].source_type == "MindMap"
        assert decls["mainTopics"].lower == 0

    def test_unlinked_instance_violates_one_one(self):
        # Intermediate state: the central topic exists but is not linked,
        # leaving the 1-1 containment unmet; exactly one finding, and the
        # model stays editable.
        m, counter = bootstrapped()
        editor_create(m, counter, "MindMap", "mindmap_0")
        editor_create(m, counter, "CentralTopic", "tasks")
        violations = check_conformance(m)
        assert len(violations) == 1
        assert violations[0].kind is ViolationKind.MULTIPLICITY
        report = commands.apply(parse("UPDATE -name tasks -w 1"), m,
                                stamp(9_000))
        assert report.status is commands.ApplyStatus.APPLIED

    def test_linked_final_state_is_valid(self):
        m, counter = bootstrapped()
        editor_create(m, counter, "MindMap", "mindmap_0")
        editor_create(m, counter, "CentralTopic", "tasks")
        commands.apply(parse("LINK -from mindmap_0.topic -to tasks"), m,
                       stamp(next(counter) * 10))
        assert check_conformance(m) == []

    def test_unresolved_type_reported(self):
        m = PhysicalModel()
        commands.apply(parse("CREATE -name x -typedBy Ghost"), m, stamp(1))
        kinds = [v.kind for v in check_conformance(m)]
        assert kinds == [ViolationKind.UNRESOLVED_TYPE]

    def test_kind_names_are_resolvable_types(self):
        m = PhysicalModel()
        commands.apply(parse("CREATE -name x -typedBy Clabject"), m, stamp(1))
        assert check_conformance(m) == []

    def test_undeclared_attribute_on_full_instance(self):
        m, counter = bootstrapped()
        editor_create(m, counter, "MindMap", "mindmap_0")
        editor_create(m, counter, "CentralTopic", "tasks")
        commands.apply(parse("LINK -from mindmap_0.topic -to tasks"), m,
                       stamp(next(counter) * 10))
        commands.apply(parse("UPDATE -name tasks -shade blue"), m,
                       stamp(next(counter) * 10))
        kinds = [v.kind for v in check_conformance(m)]
        assert kinds == [ViolationKind.UNDECLARED_ATTRIBUTE]

    def test_classes_may_declare_new_attributes(self):
        m, counter = bootstrapped()
        commands.apply(parse("UPDATE -name Marker -weight bold"), m,
                       stamp(next(counter) * 10))
        assert check_conformance(m) == []

    def test_potency_not_strictly_decreasing(self):
        m = PhysicalModel()
        commands.apply(parse("CREATE -name T -potency 1"), m, stamp(1))
        commands.apply(parse("CREATE -name i0 -typedBy T -potency 1"), m, stamp(2))
        kinds = [v.kind for v in check_conformance(m)]
        assert kinds == [ViolationKind.POTENCY]

    def test_instance_of_exhausted_type_detected(self):
        m = PhysicalModel()
        commands.apply(parse("CREATE -name T -potency 0"), m, stamp(1))
        # Arrives from a replica that instantiated before seeing the
        # potency change; merges are never blocked.
        commands.apply(parse("CREATE -name i0 -typedBy T -potency 0"), m,
                       stamp(2, REPLICA_B), origin=Origin.REMOTE)
        kinds = [v.kind for v in check_conformance(m)]
        assert kinds == [ViolationKind.POTENCY]

    def test_duplicate_live_names_reported(self):
        m = PhysicalModel()
        commands.apply(parse("CREATE -name x"), m, stamp(1))
        commands.apply(parse("CREATE -name x"), m, stamp(2, REPLICA_B),
                       origin=Origin.REMOTE)
        kinds = [v.kind for v in check_conformance(m)]
        assert kinds == [ViolationKind.AMBIGUOUS_NAME]

    def test_double_containment_reported(self):
        m = PhysicalModel()
        for i, name in enumerate(["p1", "p2", "child"]):
            commands.apply(parse(f"CREATE -name {name}"), m, stamp(i + 1))
        commands.apply(parse("LINK -from p1.Composition -to child"), m, stamp(10))
        commands.apply(parse("LINK -from p2.Composition -to child"), m, stamp(11))
        kinds = [v.kind for v in check_conformance(m)]
        assert kinds == [ViolationKind.MULTIPLICITY]

    def test_violations_recomputable_and_deterministic(self):
        m, counter = bootstrapped()
        editor_create(m, counter, "MindMap", "mindmap_0")
        assert check_conformance(m) == check_conformance(m)


class TestConformanceMode:
    def test_default_is_tolerant(self):
        m = PhysicalModel()
        assert conformance_mode(m) is Mode.TOLERANT

    def test_tolerant_applies_with_warning(self):
        m, counter = bootstrapped()
        report = editor_create(m, counter, "MindMap", "mindmap_0")
        assert report.status is commands.ApplyStatus.APPLIED
        assert len(check_conformance(m)) == 1

    def test_strict_rejects_locally_with_no_trace(self):
        m, counter = bootstrapped()
        set_conformance_mode(m, Mode.STRICT)
        before = m.graph.fingerprint()
        report = editor_create(m, counter, "MindMap", "mindmap_0")
        assert report.status is commands.ApplyStatus.ERROR
        assert report.error_kind == "LinguisticViolation"
        assert not report.recorded  # nothing to send
        assert m.graph.fingerprint() == before

    def test_strict_allows_clean_edits(self):
        m, counter = bootstrapped()
        set_conformance_mode(m, Mode.STRICT)
        report = commands.apply(parse("UPDATE -name Marker -potency 2"), m,
                                stamp(next(counter) * 10))
        assert report.status is commands.ApplyStatus.APPLIED

    def test_remote_merges_never_gated(self):
        # A strict replica and a tolerant replica receiving the identical
        # remote stream reach identical states.
        source, counter = bootstrapped()
        frames = []
        for text in ["CREATE -name mindmap_0 -typedBy MindMap -potency 0",
                     "CREATE -name tasks -typedBy CentralTopic -potency 0"]:
            s = stamp(next(counter) * 10, REPLICA_B)
            frames.append((s, text))

        strict, tolerant = bootstrapped()[0], bootstrapped()[0]
        set_conformance_mode(strict, Mode.STRICT)
        for s, text in frames:
            for replica in (strict, tolerant):
                report = commands.apply(parse(text), replica, s,
                                        origin=Origin.REMOTE)
                assert report.status is commands.ApplyStatus.APPLIED
        assert strict.graph.fingerprint() == tolerant.graph.fingerprint()
