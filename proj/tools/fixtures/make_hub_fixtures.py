"""Regenerates tests/fixtures/hub: recorded dataset-hub search and rows responses."""
import json
import pathlib
import re

ROOT = pathlib.Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "hub"

DATASETS = [
    ("acme/physics-qa", 52000, 10, "Short physics questions with numeric answers"),
    ("lab/mechanics-drills", 31000, 8, "Mechanics drill problems"),
    ("open/optics-set", 9000, 6, "Geometric optics exercises"),
    ("edu/energy-problems", 4100, 12, "Work, energy and power problems"),
    ("misc/thermo-mini", 800, 4, "Tiny thermodynamics set"),
]
GATED = ("locked/private-physics", 12000, 5, "Gated physics set")
TEST_ONLY = ("split/test-only-physics", 300, 3, "Only has a test split")


def slug(s):
    s = s.lower().replace("/", "__")
    return re.sub(r"[^a-z0-9\-._]", "_", s)


def rows_body(dataset_id, n):
    tag = dataset_id.split("/")[1]
    rows = []
    for i in range(n):
        rows.append({
            "row_idx": i,
            "row": {
                "question": f"[{tag} {i}] A body of mass {i + 2} kg moves at {3 * i + 1} m/s. What is its kinetic energy?",
                "answer": f"{(i + 2) * (3 * i + 1) ** 2 / 2:g} J",
                "difficulty": {"level": i % 3},
            },
        })
    return {
        "features": [
            {"feature_idx": 0, "name": "question", "type": {"dtype": "string"}},
            {"feature_idx": 1, "name": "answer", "type": {"dtype": "string"}},
            {"feature_idx": 2, "name": "difficulty", "type": {"level": {"dtype": "int64"}}},
        ],
        "rows": rows,
    }


def write(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n")


def main():
    listing = [{"id": d, "downloads": dl, "description": desc} for d, dl, _, desc in DATASETS]
    write(ROOT / "search" / "physics.json", listing)
    write(ROOT / "search" / "kinetic.json", listing[:2] + [{"id": GATED[0], "downloads": GATED[1], "description": GATED[3]}])
    write(ROOT / "search" / "optics.json", [{"id": TEST_ONLY[0], "downloads": TEST_ONLY[1], "description": TEST_ONLY[3]}])
    write(ROOT / "search" / "forbidden.json", {"fixture_status": 401, "body": {"error": "Invalid credentials"}})
    for d, _, n, _ in DATASETS:
        write(ROOT / "rows" / f"{slug(d)}.json", rows_body(d, n))
    write(ROOT / "rows" / f"{slug(GATED[0])}.json", {"fixture_status": 401, "body": {"error": "gated dataset"}})
    write(ROOT / "rows" / f"{slug(GATED[0])}.authorized.json", rows_body(GATED[0], GATED[2]))
    write(ROOT / "rows" / f"{slug(TEST_ONLY[0])}@test.json", rows_body(TEST_ONLY[0], TEST_ONLY[2]))


if __name__ == "__main__":
    main()
