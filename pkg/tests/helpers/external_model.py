"""Minimal external models speaking the line-delimited JSON protocol.

Usage: python external_model.py MODE N_FEATURES [ARGS...]
  fixed-proba N P0 P1   probabilistic; every row answers (P0, P1)
  sum N                 continuous; y is the row sum
  error N               continuous; predict replies with an error object
  die N                 continuous; exits on the first predict request
"""

import json
import sys


def main() -> int:
    mode = sys.argv[1]
    n_features = int(sys.argv[2])
    kind = "probabilistic" if mode == "fixed-proba" else "continuous"
    for line in sys.stdin:
        req = json.loads(line)
        op = req["op"]
        if op == "info":
            reply = {"kind": kind, "n_features": n_features, "n_classes": 2}
        elif op == "predict":
            if mode == "sum":
                reply = {"y": [sum(row) for row in req["x"]]}
            elif mode == "error":
                reply = {"error": "synthetic failure"}
            elif mode == "die":
                return 3
            else:
                reply = {"error": f"predict unsupported in mode {mode}"}
        elif op == "predict_proba":
            if mode == "fixed-proba":
                p0, p1 = float(sys.argv[3]), float(sys.argv[4])
                reply = {"p": [[p0, p1] for _ in req["x"]]}
            else:
                reply = {"error": f"predict_proba unsupported in mode {mode}"}
        else:
            reply = {"error": f"unknown op {op}"}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
