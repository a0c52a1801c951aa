#!/usr/bin/env python3
"""Line-protocol test plugin.

usage: stub_plugin.py [mode]
  normal       canBeZero: consts by value, registers "true"; isEven: consts by value
  unsupported  advertises canBeZero, answers "unsupported"
  crash        exits after the handshake, on the first request
  badjson      answers with a line that is not JSON
  hang         never answers
  nohandshake  exits before the handshake
Requests are appended to $STUB_LOG when set.
"""
import json
import os
import sys
import time

mode = sys.argv[1] if len(sys.argv) > 1 else "normal"
log = os.environ.get("STUB_LOG")


def send(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


if mode == "nohandshake":
    sys.exit(1)

send({"capabilities": ["canBeZero", "isEven"]})

for line in sys.stdin:
    req = json.loads(line)
    if log:
        with open(log, "a") as f:
            f.write(line)
    if mode == "crash":
        sys.exit(3)
    if mode == "hang":
        time.sleep(3600)
    if mode == "badjson":
        sys.stdout.write("not json\n")
        sys.stdout.flush()
        continue
    if mode == "unsupported":
        send({"answer": "unsupported"})
        continue
    arg = req["args"][0] if req["args"] else {}
    kind = arg.get("kind")
    if req["query"] == "canBeZero":
        if kind in ("const", "int"):
            send({"answer": "true" if arg["value"] == 0 else "false"})
        else:
            send({"answer": "true"})
    elif req["query"] == "isEven" and kind in ("const", "int"):
        send({"answer": "true" if arg["value"] % 2 == 0 else "false"})
    else:
        send({"answer": "maybe"})
