"""Line-delimited JSON over a child process's standard streams.

One request per line on stdin; the child answers with one JSON object per
line echoing the request ``id``. A background thread pumps stdout into a
queue so requests can time out without blocking forever.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading


class ProcessProtocolError(RuntimeError):
    """The child process broke the NDJSON contract (timeout, bad JSON)."""


class NdjsonProcess:
    """Single-flight request/response transport to a child process."""

    def __init__(self, argv: list[str], timeout_s: float = 30.0):
        self._argv = list(argv)
        self._timeout_s = timeout_s
        self._lock = threading.Lock()
        self._proc: subprocess.Popen | None = None
        self._responses: queue.Queue = queue.Queue()
        self._next_id = 0

    def _ensure_started(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        self._proc = subprocess.Popen(
            self._argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._responses = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc,), daemon=True).start()

    def _pump(self, proc: subprocess.Popen) -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            line = line.strip()
            if line:
                self._responses.put(line)

    def request(self, payload: dict) -> dict:
        """Send one request and wait for the response echoing its id."""
        with self._lock:
            self._ensure_started()
            assert self._proc is not None and self._proc.stdin is not None
            req_id = self._next_id
            self._next_id += 1
            self._proc.stdin.write(json.dumps({"id": req_id, **payload}) + "\n")
            self._proc.stdin.flush()
            for _ in range(3):  # tolerate stray lines before the matching id
                try:
                    line = self._responses.get(timeout=self._timeout_s)
                except queue.Empty:
                    raise ProcessProtocolError(
                        f"external process timed out after {self._timeout_s}s"
                    ) from None
                try:
                    response = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ProcessProtocolError(
                        f"external process sent invalid JSON: {line!r}"
                    ) from exc
                if response.get("id") == req_id:
                    return response
            raise ProcessProtocolError("external process never echoed the request id")

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            self._proc.wait(timeout=5)
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
