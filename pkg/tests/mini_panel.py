"""A tiny two-expert scripted panel used by the pipeline tests.

Small enough to reason about by hand: two experts, two top criteria with
two sub-criteria each, and two final alternatives, all driven through the
standard scripted-backend handlers.
"""

import json

GOAL = "Choose a door security upgrade for the records annex"

PERSONAS_REPLY = """Security Analyst, Rivka Stone:
Background: Ten years of enterprise security reviews.
Personality/Preferences: Methodical and blunt.

Facilities Manager, Theo Park:
Background: Runs physical operations for two campuses.
Personality/Preferences: Pragmatic and budget-minded.
"""

E1, E2 = "rivka-stone", "theo-park"

RULES = [
    {"match": r"How many experts", "persona": "ahp-guide",
     "reply": "For this scale, a group of 2-3 experts from key areas is enough."},
    {"match": r"How many criteria levels", "persona": "ahp-guide",
     "reply": "A two-level structure is plenty here."},
    {"match": r"high quality diverse experts", "persona": "ahp-guide",
     "reply": PERSONAS_REPLY},
    {"match": r"sub-criteria for the criterion", "handler": "ballot_subcriteria"},
    {"match": r"for each of these \d+ criteria:", "handler": "ballot_criteria"},
    {"match": r"whether an alternative can satisfy our main goal",
     "handler": "ballot_alternatives"},
    {"match": r"come up with \d+ top-level criteria", "handler": "propose_criteria"},
    {"match": r"come up with \d+ sub-criteria", "handler": "propose_subcriteria"},
    {"match": r"come up with \d+ alternatives", "handler": "propose_alternatives"},
    {"match": r"pairwise comparison matrix for the list of our top-level criteria",
     "handler": "matrix_top"},
    {"match": r"create a separate comparison matrix for each of these",
     "handler": "matrix_sub"},
    {"match": r"build pairwise comparison matrices to select best alternatives",
     "handler": "matrix_alt"},
]


def _m(labels, rows):
    return {"labels": labels, "rows": rows}


TOP = ["Staff Training", "Access Control"]
ST_SUBS = ["Phishing Drills", "Policy Refreshers"]
AC_SUBS = ["Badge Audits", "Visitor Logs"]
ALTS = ["Smart Badge Rollout", "Reinforced Door Sets"]

DATA = {
    "criteria_proposals": {
        E1: ["Staff Training", "Access Control"],
        E2: ["Access Control", "Hardware Quality"],
    },
    "criteria_scores": {
        E1: {"staff training": 9, "access control": 7, "hardware quality": 3},
        E2: {"staff training": 8, "access control": 9, "hardware quality": 4},
    },
    "subcriteria_proposals": {
        E1: {"Staff Training": ["Phishing Drills", "Policy Refreshers"],
             "Access Control": ["Badge Audits", "Visitor Logs"]},
        E2: {"Staff Training": ["Phishing Drills", "Vendor Briefings"],
             "Access Control": ["Badge Audits", "Door Sensors"]},
    },
    "subcriteria_scores": {
        E1: {"Staff Training": {"phishing drills": 9, "policy refreshers": 7,
                                "vendor briefings": 4},
             "Access Control": {"badge audits": 8, "visitor logs": 7,
                                "door sensors": 5}},
        E2: {"Staff Training": {"phishing drills": 9, "policy refreshers": 6,
                                "vendor briefings": 5},
             "Access Control": {"badge audits": 9, "visitor logs": 6,
                                "door sensors": 7}},
    },
    "alternative_proposals": {
        E1: ["Smart Badge Rollout", "Guard Desk Staffing"],
        E2: ["Reinforced Door Sets", "Smart Badge Rollout"],
    },
    "alternative_scores": {
        E1: {"smart badge rollout": 9, "guard desk staffing": 5,
             "reinforced door sets": 6},
        E2: {"smart badge rollout": 8, "guard desk staffing": 4,
             "reinforced door sets": 7},
    },
    "matrices": {
        E1: {
            "top": _m(TOP, [["1", "2"], ["1/2", "1"]]),
            "sub:Staff Training": _m(ST_SUBS, [["1", "3"], ["1/3", "1"]]),
            "sub:Access Control": _m(AC_SUBS, [["1", "2"], ["1/2", "1"]]),
            "alt:Phishing Drills": _m(ALTS, [["1", "5"], ["1/5", "1"]]),
            "alt:Policy Refreshers": _m(ALTS, [["1", "2"], ["1/2", "1"]]),
            "alt:Badge Audits": _m(ALTS, [["1", "1/2"], ["2", "1"]]),
            "alt:Visitor Logs": _m(ALTS, [["1", "1"], ["1", "1"]]),
        },
        E2: {
            "top": _m(TOP, [["1", "3"], ["1/3", "1"]]),
            "sub:Staff Training": _m(ST_SUBS, [["1", "2"], ["1/2", "1"]]),
            "sub:Access Control": _m(AC_SUBS, [["1", "1"], ["1", "1"]]),
            "alt:Phishing Drills": _m(ALTS, [["1", "3"], ["1/3", "1"]]),
            "alt:Policy Refreshers": _m(ALTS, [["1", "2"], ["1/2", "1"]]),
            "alt:Badge Audits": _m(ALTS, [["1", "1/3"], ["3", "1"]]),
            "alt:Visitor Logs": _m(ALTS, [["1", "1/2"], ["2", "1"]]),
        },
    },
    "rationales": {
        E1: {"top": "Rationale: training addresses the root causes I see in audits."},
        E2: {"top": "Rationale: controlled access matters, but people fail first."},
    },
}

CONFIG_TEMPLATE = """[pipeline]
goal = {goal}
expert_count = 2
top_criteria_count = 2
sub_per_criterion = 2
alternatives_per_expert = 2
final_alternative_count = 2
matrix_batch_size = 2
parallelism = {parallelism}
max_repairs = {max_repairs}
{extra_pipeline}
[backend]
kind = scripted
script = {script}
"""


def write_mini_panel(tmp_path, *, parallelism=1, max_repairs=2,
                     extra_rules=(), extra_pipeline=""):
    """Write the script + config files; returns the config path."""
    tmp_path.mkdir(parents=True, exist_ok=True)
    script = {"rules": list(extra_rules) + RULES, "data": DATA}
    script_path = tmp_path / "mini_script.json"
    script_path.write_text(json.dumps(script, indent=2), encoding="utf-8")
    config_path = tmp_path / "mini.ini"
    config_path.write_text(
        CONFIG_TEMPLATE.format(goal=GOAL, script=script_path,
                               parallelism=parallelism, max_repairs=max_repairs,
                               extra_pipeline=extra_pipeline),
        encoding="utf-8")
    return config_path
