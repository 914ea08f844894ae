"""Parser, printer, validator and analysis tests for the application DSL."""

import glob

import pytest

from conftest import PROGRAMS, program_text
from scjcheck import appmodel
from scjcheck.appmodel import ParseError, analyze, parse_program, print_program, validate


ALL_PROGRAMS = sorted(p.name for p in PROGRAMS.glob("*.scj2"))


class TestRoundTrip:
    @pytest.mark.parametrize("name", ALL_PROGRAMS)
    def test_print_parse_fixpoint(self, name):
        spec = parse_program(program_text(name))
        printed = print_program(spec)
        again = parse_program(printed)
        assert print_program(again) == printed
        assert again == spec


def errors(text):
    try:
        spec = parse_program(text)
    except ParseError as e:
        return sorted(d.code for d in e.diagnostics)
    return sorted(d.code for d in validate(spec) if d.severity == "error")


GOOD = """\
safelet App { sequencer = Seq }
sequencer Seq { missions = [M] }
mission M {
  vars { x: int = 0; }
  registers = [H]
  sync method poke(): void { x = 1; }
}
periodic H priority = 1 period = 2 {
  handle { requestTermination(M); }
}
"""


class TestValidator:
    def test_good_program_is_clean(self):
        assert errors(GOOD) == []

    def test_unknown_sequencer(self):
        assert errors(GOOD.replace("sequencer = Seq", "sequencer = Nope"))

    def test_duplicate_declaration(self):
        dup = GOOD + "periodic H priority = 1 period = 2 {\n  handle {}\n}\n"
        assert "V009" in errors(dup)

    def test_underscore_names_rejected(self):
        assert "V018" in errors(GOOD.replace("mission M", "mission _M")
                                    .replace("(M)", "(_M)")
                                    .replace("[M]", "[_M]"))

    def test_cross_mission_registration(self):
        bad = GOOD.replace("missions = [M]", "missions = [M, N]") + \
            "mission N { registers = [H] }\n"
        assert "V006" in errors(bad)

    def test_wait_target_must_be_mission(self):
        bad = GOOD.replace("x = 1;", "x = 1; wait(H);")
        assert "V013" in errors(bad)

    def test_termination_target_is_enclosing_mission(self):
        bad = GOOD.replace("requestTermination(M)", "requestTermination(Seq)")
        assert "V014" in errors(bad)

    def test_return_only_in_final_position(self):
        bad = GOOD.replace("{ x = 1; }", "{ return; x = 1; }")
        assert "V016" in errors(bad)

    def test_recursive_method_rejected(self):
        bad = GOOD.replace("{ x = 1; }", "{ call poke(); }")
        assert "V019" in errors(bad)

    def test_var_init_must_be_literal(self):
        bad = GOOD.replace("x: int = 0;", "x: int = 1 + 1;")
        assert errors(bad)

    def test_parse_error_reports_line(self):
        with pytest.raises(ParseError) as e:
            parse_program("safelet { }")
        assert e.value.diagnostics[0].line >= 1


class TestAnalysis:
    def test_sync_objects_and_threads(self):
        a = analyze(parse_program(program_text("flatbuffer.scj2")))
        assert a.sync_oids == ("M",)
        assert set(a.thread_sids) == {"Writer", "Reader"}
        assert a.ceilings["M"] == 3

    def test_default_ceiling_is_max_priority(self):
        a = analyze(parse_program(GOOD))
        assert a.ceilings["M"] == 1

    def test_intrange_covers_timing_constants(self):
        a = analyze(parse_program(program_text("overrun.scj2")))
        lo, hi = a.intrange
        assert lo == 0 and hi >= 20

    def test_probe_labels_collected(self):
        a = analyze(parse_program(program_text("flatbuffer.scj2")))
        assert a.probes == ("wrote", "consumed")
