import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from causalscope.graph import parse_graph  # noqa: E402

# graphs reused across modules, as edge lists
GRAPHS = {
    "chain": "A->Z, Z->Y",
    "fork": "Z->A, Z->Y",
    "collider": "A->Z, Y->Z, Z->Zp",
    "worked": "A->B, C->A, B->E, D->E, E->F, C->F, C->D",
    "randomized": "A->Y",
    "confounded": "C->A, C->Y, A->Y",
    "bow_arc": "U->A, U->Y, A->Y",
    "collider_bias": "A_0->L_1, L_1->A_1, U->L_1, U->Y",
    "two_phase": ("A_0->L_1, L_1->A_1, U_1->L_1, U_1->Y, A_1->Y, L_0->A_0, U_0->L_0, U_0->L_1, "
             "U_0->U_1, L_0->L_1, L_0->A_1, L_0->Y, A_0->A_1, A_0->Y, L_1->Y"),
    "case_full": "A->M, M->Y, A->G, Y->G, C->A, C->Y, C->M, M->G, A->Y, C->G, Z->Y, Z->C",
    "case_latent": "A->Y, C->Y, C->A, C<->Y",
    "case_mediator": "A<->M, C->Y, C->A, M->Y, C<->Y, A->Y",
}
HIDDEN = {"bow_arc": ["U"], "collider_bias": ["U"], "two_phase": ["U_0", "U_1"], "case_full": ["Z"]}


def graph(name):
    return parse_graph(GRAPHS[name], unobserved=HIDDEN.get(name, ()))


# -- acceptance reporting ---------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def record():
    def _record(number: int, title: str, passed: bool, detail: str = ""):
        ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"[acceptance {number:2d}] {'PASS' if passed else 'FAIL'}  {title}  {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{number:2d}. {'PASS' if passed else 'FAIL'}  {title}  {detail}")
