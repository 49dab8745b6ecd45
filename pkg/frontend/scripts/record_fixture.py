"""Re-record tests/fixtures/session_frames.json from a real service session.

Run from the frontend directory after any wire-schema change:

    python3 scripts/record_fixture.py
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from otcsim.service.app import create_app


def main() -> None:
    app = create_app()
    with TestClient(app) as client:
        sid = client.post("/sessions", json={"config": {"rng_seed": 42}}).json()[
            "session_id"
        ]
        network_before = client.get(f"/sessions/{sid}/network").json()
        frames = []
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            client.post(f"/sessions/{sid}/command", json={"verb": "step", "n": 40})
            for _ in range(40):
                frames.append(ws.receive_json())
        ack = client.post(f"/sessions/{sid}/command", json={"verb": "crash"}).json()
        network_after = client.get(f"/sessions/{sid}/network").json()
        summary = client.get(f"/sessions/{sid}").json()

    out = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "session_frames.json"
    out.write_text(
        json.dumps(
            {
                "session_id": sid,
                "frames": frames,
                "network_before_crash": network_before,
                "crash_ack": ack,
                "network_after_crash": network_after,
                "summary": summary,
            },
            indent=1,
        )
    )
    print(f"recorded {len(frames)} frames to {out}")


if __name__ == "__main__":
    main()
