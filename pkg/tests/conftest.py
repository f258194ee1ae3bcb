import json
from pathlib import Path

import pytest

from ahp_panel.matrices import PairwiseMatrix, load_matrix_csv

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "ahp_panel" / "fixtures"

TOP_CRITERIA = [
    "Social Engineering Awareness",
    "Physical Access Controls",
    "Audit Trails",
    "Behavior Analysis",
    "Operational Risk Controls",
    "Psychological Profiling",
    "Service Level Agreements",
]

SUBCRITERIA = {
    "Social Engineering Awareness": [
        "Training Program Effectiveness", "Awareness Session Regularity",
        "Incident Reporting Protocol"],
    "Physical Access Controls": [
        "Biometric System Reliability", "Visitor Tracking System",
        "Access Point Monitoring"],
    "Audit Trails": [
        "Log Analysis Accuracy", "Audit Frequency", "Anomaly Tracking Efficiency"],
    "Behavior Analysis": [
        "User Behavior Monitoring", "Response to Anomalies", "Activity Pattern Analysis"],
    "Operational Risk Controls": [
        "Infrastructure Vulnerability Check", "Data Redundancy Systems",
        "Emergency Protocol Effectiveness"],
    "Psychological Profiling": [
        "Staff Behavior Assessment", "Risk Behavior Profiling", "Continuous Observation"],
    "Service Level Agreements": [
        "Response Time Commitment", "Data Privacy Assurance",
        "Breach Penalty Specification"],
}

ALTERNATIVES = [
    "Cloud-Based Data Backup Solutions",
    "Physical Barrier Reinforcement",
    "Security Personnel Training Update",
    "Comprehensive Employee Training Programs",
    "Advanced Intrusion Detection Systems",
]


@pytest.fixture(scope="session")
def table1() -> PairwiseMatrix:
    return load_matrix_csv(FIXTURES / "table1_top_criteria.csv")


@pytest.fixture(scope="session")
def table2() -> PairwiseMatrix:
    return load_matrix_csv(FIXTURES / "table2_sea_subcriteria.csv")


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


def load_fixture_json(name: str):
    return json.loads((FIXTURES / name).read_text(encoding="utf-8"))
