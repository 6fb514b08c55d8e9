import io

import numpy as np
import pytest

from aupatterns.annotations import (
    AnnotationError,
    AuPattern,
    AuRegistry,
    DatasetTable,
    infer_registry,
    parse_annotations,
    registry_for_bp4d,
    registry_for_disfa,
    serialize_annotations,
)

from conftest import make_table


class TestRegistry:
    def test_bp4d_codes(self):
        reg = registry_for_bp4d()
        assert reg.k == 12
        assert reg.codes == (1, 2, 4, 6, 7, 10, 12, 14, 15, 17, 23, 24)

    def test_disfa_codes(self):
        reg = registry_for_disfa()
        assert reg.k == 12
        assert 25 in reg.codes and 26 in reg.codes
        assert reg.codes == (1, 2, 4, 5, 6, 9, 12, 15, 17, 20, 25, 26)

    def test_strictly_increasing(self):
        for reg in (registry_for_bp4d(), registry_for_disfa()):
            assert all(a < b for a, b in zip(reg.codes, reg.codes[1:]))

    @pytest.mark.parametrize("codes", [(), (0,), (-1, 2), (1, 1), (2, 1)])
    def test_invalid_codes(self, codes):
        with pytest.raises(ValueError):
            AuRegistry(codes)

    def test_index_of(self):
        reg = registry_for_bp4d()
        assert reg.index_of(10) == 5
        with pytest.raises(KeyError):
            reg.index_of(3)


class TestPattern:
    def test_string_round_trip(self):
        p = AuPattern.from_string("0110")
        assert p.bits == (0, 1, 1, 0)
        assert p.to_string() == "0110"
        assert p.n_active == 2

    def test_ordering_is_bitwise_lexicographic(self):
        assert AuPattern.from_string("0011") < AuPattern.from_string("0100")
        assert sorted([AuPattern.from_string(s) for s in ("10", "01", "00")]) == [
            AuPattern.from_string(s) for s in ("00", "01", "10")
        ]

    def test_invalid_bits(self):
        with pytest.raises(ValueError):
            AuPattern((0, 2))
        with pytest.raises(ValueError):
            AuPattern(())

    def test_active_codes(self):
        reg = AuRegistry((1, 4, 9))
        assert AuPattern.from_string("101").active_codes(reg) == (1, 9)


class TestParse:
    def test_single_row(self, reg2):
        table = parse_annotations("subject,task,frame,AU1,AU2\nS1,T1,0,1,0\n", reg2)
        assert len(table) == 1
        assert table.frames[0].pattern.bits == (1, 0)
        assert table.frames[0].key == ("S1", "T1", 0)

    def test_empty_data_section(self, reg2):
        with pytest.raises(AnnotationError, match="no frames"):
            parse_annotations("subject,task,frame,AU1,AU2\n", reg2)

    def test_missing_column_named(self, reg2):
        with pytest.raises(AnnotationError, match="AU2"):
            parse_annotations("subject,task,frame,AU1\nS1,T1,0,1\n", reg2)

    def test_extra_column_named(self, reg2):
        text = "subject,task,frame,AU1,AU2,AU3\nS1,T1,0,1,0,0\n"
        with pytest.raises(AnnotationError, match="AU3"):
            parse_annotations(text, reg2)

    @pytest.mark.parametrize("cell", ["2", "5", "9", "", "x", "1.0", " 1"])
    def test_non_binary_cell_rejected_with_row(self, reg2, cell):
        text = f"subject,task,frame,AU1,AU2\nS1,T1,0,1,0\nS1,T1,1,{cell},0\n"
        with pytest.raises(AnnotationError, match="row 2"):
            parse_annotations(text, reg2)

    def test_duplicate_key(self, reg2):
        text = "subject,task,frame,AU1,AU2\nS1,T1,0,1,0\nS1,T1,0,0,0\n"
        with pytest.raises(AnnotationError, match="duplicate"):
            parse_annotations(text, reg2)

    def test_negative_frame_index(self, reg2):
        with pytest.raises(AnnotationError, match="negative"):
            parse_annotations("subject,task,frame,AU1,AU2\nS1,T1,-1,1,0\n", reg2)

    def test_crlf_accepted(self, reg2):
        lf = parse_annotations("subject,task,frame,AU1,AU2\nS1,T1,0,1,0\n", reg2)
        crlf = parse_annotations("subject,task,frame,AU1,AU2\r\nS1,T1,0,1,0\r\n", reg2)
        assert lf.frames == crlf.frames

    def test_accepts_stream(self, reg2):
        table = parse_annotations(io.StringIO("subject,task,frame,AU1,AU2\nS1,T1,0,1,0\n"), reg2)
        assert len(table) == 1

    def test_order_preserved_and_total(self, rng, reg2):
        rows = [f"S{i%3},T1,{i},{i%2},{(i+1)%2}" for i in range(50)]
        text = "subject,task,frame,AU1,AU2\n" + "\n".join(rows) + "\n"
        table = parse_annotations(text, reg2)
        assert len(table) == 50
        assert [f.frame_index for f in table.frames] == list(range(50))

    def test_round_trip(self, reg2):
        text = "subject,task,frame,AU1,AU2\nS1,T1,0,1,0\nS2,T3,7,0,1\n"
        assert serialize_annotations(parse_annotations(text, reg2)) == text

    def test_round_trip_modulo_trailing_whitespace(self, reg2):
        text = "subject,task,frame,AU1,AU2\nS1,T1,0,1,0"
        out = serialize_annotations(parse_annotations(text, reg2))
        assert out.rstrip("\n") == text

    def test_full_scale_row_count(self, tmp_path):
        # a file the size of a full annotated corpus parses completely
        reg = registry_for_bp4d()
        n = 146_847
        lines = ["subject,task,frame,AU1,AU2,AU4,AU6,AU7,AU10,AU12,AU14,AU15,AU17,AU23,AU24"]
        row = "1,0,1,0,1,0,1,0,1,0,1,0"
        per_subject = n // 41 + 1
        for i in range(n):
            lines.append(f"S{i // per_subject},T{i % 8},{i},{row}")
        table = parse_annotations("\n".join(lines), reg)
        assert len(table) == n


class TestTable:
    def test_width_mismatch_rejected(self):
        reg = AuRegistry((1, 2, 4))
        with pytest.raises(ValueError, match="width"):
            make_table(reg, [("S1", "T1", 0, "10")])

    def test_duplicate_key_rejected(self, reg2):
        with pytest.raises(AnnotationError, match="duplicate"):
            make_table(reg2, [("S1", "T1", 0, "10"), ("S1", "T1", 0, "01")])

    def test_pattern_matrix(self, reg2):
        t = make_table(reg2, [("S1", "T1", 0, "10"), ("S1", "T1", 1, "01")])
        assert np.array_equal(t.pattern_matrix(), [[1, 0], [0, 1]])

    def test_subjects_tasks(self, reg2):
        t = make_table(
            reg2,
            [("S2", "T1", 0, "10"), ("S1", "T2", 0, "01"), ("S2", "T2", 1, "00")],
        )
        assert t.subjects() == ("S2", "S1")
        assert t.tasks() == ("T1", "T2")

    def test_infer_registry_round_trip(self):
        reg = registry_for_disfa()
        header = ",".join(["subject", "task", "frame"] + reg.column_names())
        assert infer_registry(header) == reg

    def test_infer_registry_bad_column(self):
        with pytest.raises(AnnotationError, match="AUx"):
            infer_registry("subject,task,frame,AUx")
