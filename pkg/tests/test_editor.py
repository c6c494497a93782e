import io
import uuid

import pytest

from comodel import conformance
from comodel.client import ReplicaSession
from comodel.commands import ByName, Create, Delete, Link, Update
from comodel.editor import (
    CreateVerb,
    DeleteVerb,
    EditorLoop,
    EditorSyntaxError,
    HelpVerb,
    LinkVerb,
    ObjectsVerb,
    QuitVerb,
    ReadVerb,
    UpdateVerb,
    ViolationsVerb,
    bootstrap_mindmap_metamodel,
    parse_verb,
    render_read,
    translate,
)
from comodel.model import PhysicalModel


class LoopbackClient:
    """A live session that applies locally and drops frames (single user)."""

    def __init__(self):
        self.session = ReplicaSession(uuid.UUID(int=0xED))
        self.session.on_line("SBEG")
        self.session.on_line("SEND")

    @property
    def model(self):
        return self.session.model

    def poll(self):
        return 0

    def submit(self, cmd):
        report, _ = self.session.submit_local(cmd)
        return report


def editor_with(lines):
    client = LoopbackClient()
    out = io.StringIO()
    loop = EditorLoop(client, out)
    bootstrap_mindmap_metamodel(client.submit, client.model)
    for line in lines:
        loop.execute(line)
    return client, loop, out


class TestParseVerb:
    def test_all_verbs(self):
        assert parse_verb("READ") == ReadVerb()
        assert parse_verb("OBJECTS") == ObjectsVerb()
        assert parse_verb("VIOLATIONS") == ViolationsVerb()
        assert parse_verb("QUIT") == QuitVerb()
        assert parse_verb("HELP") == HelpVerb()
        assert parse_verb("CREATE MindMap mindmap_0") == \
            CreateVerb("MindMap", "mindmap_0")
        assert parse_verb("LINK mindmap_0.topic TO tasks") == \
            LinkVerb("mindmap_0", "topic", "tasks")
        assert parse_verb("UPDATE mindmap_0 title todolist") == \
            UpdateVerb("mindmap_0", "title", "todolist")
        assert parse_verb("DELETE tasks") == DeleteVerb("tasks")

    def test_update_value_may_contain_spaces(self):
        verb = parse_verb("UPDATE mindmap_0 title Improve publication record")
        assert verb.value == "Improve publication record"

    def test_blank_line_is_noop(self):
        assert parse_verb("   ") is None

    def test_bad_verbs_raise(self):
        for line in ("CREATE onlyone", "LINK a.b c", "LINK ab TO c",
                     "UPDATE x onlyattr", "DELETE two words", "NONSENSE"):
            with pytest.raises(EditorSyntaxError):
                parse_verb(line)


class TestTranslate:
    def test_create_maps_to_one_physical_command(self):
        client = LoopbackClient()
        bootstrap_mindmap_metamodel(client.submit, client.model)
        cmd = translate(CreateVerb("MindMap", "mindmap_0"), client.model)
        assert isinstance(cmd, Create)
        assert cmd.name == "mindmap_0" and cmd.typed_by == "MindMap"
        # Potency materialized one below the type; empty declared defaults
        # are initialized to the instance name.
        assert dict(cmd.attrs) == {"potency": "0", "title": "mindmap_0"}

    def test_create_unknown_type_stays_plain(self):
        cmd = translate(CreateVerb("Ghost", "g"), PhysicalModel())
        assert cmd == Create("g", "Ghost")

    def test_link_and_update_and_delete(self):
        m = PhysicalModel()
        assert translate(LinkVerb("a", "topic", "b"), m) == Link("a", "topic", "b")
        assert translate(UpdateVerb("a", "title", "x"), m) == \
            Update(ByName("a"), (("title", "x"),))
        assert translate(DeleteVerb("a"), m) == Delete(ByName("a"))


class TestBootstrap:
    def test_objects_lists_metamodel_clabjects(self):
        client, loop, out = editor_with(["OBJECTS"])
        text = out.getvalue()
        for name in ("MindMap", "Topic", "CentralTopic", "MainTopic",
                     "SubTopic", "Marker", "topic", "mainTopics",
                     "subtopics", "markers"):
            assert name in text

    def test_bootstrap_is_clean_and_idempotent(self):
        client, loop, out = editor_with([])
        assert conformance.check_conformance(client.model) == []
        assert bootstrap_mindmap_metamodel(client.submit, client.model) == 0
        assert len(client.model.read_model().elements) == 7

    def test_instance_read_shows_name_and_type(self):
        client, _, _ = editor_with(["CREATE MindMap mindmap_0"])
        assert "mindmap_0 : MindMap" in render_read(client.model)


GOLDEN_READ = """\
Class : Clabject (p*)
Marker : Class (p1) {symbol=}
MindMap : Class (p1) {title=}
  [topic : Composition] CentralTopic : Class (p1)
    [mainTopics : Composition] MainTopic : Class (p1)
      [subtopics : Composition] SubTopic : Class (p1)
Topic : Class (p1)
  -> [markers : Association] Marker
m1 : Marker (p0) {symbol=m1}
mindmap_0 : MindMap (p0) {title=todolist}
  [topic_0 : topic] tasks : CentralTopic (p0)
    -> [markers_0 : markers] m1
    [mainTopics_0 : mainTopics] todos : MainTopic (p0)"""


class TestRead:
    def test_golden_full_session(self):
        client, _, _ = editor_with([
            "CREATE MindMap mindmap_0",
            "UPDATE mindmap_0 title todolist",
            "CREATE CentralTopic tasks",
            "LINK mindmap_0.topic TO tasks",
            "CREATE MainTopic todos",
            "LINK tasks.mainTopics TO todos",
            "CREATE Marker m1",
            "LINK tasks.markers TO m1",
        ])
        assert render_read(client.model) == GOLDEN_READ

    def test_empty_model(self):
        assert render_read(PhysicalModel()) == "(empty model)"

    def test_read_deterministic(self):
        client, _, _ = editor_with(["CREATE MindMap m0"])
        assert render_read(client.model) == render_read(client.model)


class TestEditorFlow:
    def test_scenario_four_potency_chain(self):
        client, loop, out = editor_with([
            "CREATE Marker marker_0",
            "UPDATE Marker potency 2",
            "CREATE Marker TextMarker",
            "UPDATE marker_0 typedBy TextMarker",
            "CREATE TextMarker marker_1",
        ])
        model = client.model
        assert model.find("Marker").potency == 2
        assert model.find("TextMarker").potency == 1
        assert model.find("marker_1").potency == 0
        loop.execute("CREATE marker_1 nope")
        assert "PotencyExhausted" in out.getvalue()
        assert model.find("nope") is None

    def test_violations_verb_reports_and_clears(self):
        client, loop, out = editor_with(["CREATE MindMap mindmap_0"])
        loop.execute("VIOLATIONS")
        assert "MultiplicityViolation" in out.getvalue()
        loop.execute("CREATE CentralTopic tasks")
        loop.execute("LINK mindmap_0.topic TO tasks")
        out.truncate(0)
        out.seek(0)
        loop.execute("VIOLATIONS")
        assert out.getvalue().strip() == "(no violations)"

    def test_errors_keep_the_loop_alive(self):
        client, loop, out = editor_with([])
        assert loop.execute("UPDATE ghost a b") is True
        assert "UnknownElement" in out.getvalue()
        assert loop.execute("WAT") is True
        assert loop.execute("QUIT") is False

    def test_script_replay(self):
        client = LoopbackClient()
        out = io.StringIO()
        loop = EditorLoop(client, out)
        bootstrap_mindmap_metamodel(client.submit, client.model)
        loop.run_script([
            "# comment lines are skipped",
            "CREATE MindMap m0",
            "",
            "READ",
            "QUIT",
            "CREATE MindMap never_reached",
        ])
        assert client.model.find("m0") is not None
        assert client.model.find("never_reached") is None
        assert "m0 : MindMap" in out.getvalue()


class TestCliProcess:
    def test_editor_script_against_live_server(self, tmp_path):
        import subprocess
        import sys

        from conftest import ServerThread

        server = ServerThread()
        try:
            script = tmp_path / "session.txt"
            script.write_text("CREATE MindMap m0\nREAD\nQUIT\n")
            proc = subprocess.run(
                [sys.executable, "-m", "comodel.editor",
                 "--server", f"127.0.0.1:{server.server.port}",
                 "--bootstrap", "--script", str(script)],
                capture_output=True, text=True, timeout=60)
            assert proc.returncode == 0, proc.stderr
            assert "bootstrap: 11 commands issued" in proc.stdout
            assert "m0 : MindMap" in proc.stdout
            # The editing session fed the shared history.
            assert len(server.server.hub.history) == 12
        finally:
            server.stop()
