"""Review-queue service: task leasing, submission, and the HTTP API.

The queue hands out one silver paragraph per lease, collects corrected
spans, and persists every transition to an append-only event log *before*
acknowledging it, so no human work is lost to a crash; replaying the log
reconstructs the queue.  Task state transitions are serialized per queue,
and a lease expires back to PENDING after a timeout so abandoned work
recirculates.

Wire protocol (JSON over HTTP):
    GET  /api/rounds/current      -> current round number and task counts
    POST /api/tasks/lease         -> {reviewer_id} -> a task or 204
    POST /api/tasks/{id}/submit   -> {reviewer_id, spans} -> ack
    GET  /api/progress            -> counts across the current round
Span payloads use the dataset span structure (start, end, token_start,
token_end, label).
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from .annotations import (
    LabeledParagraph,
    Provenance,
    Span,
    SpanAlignmentError,
    labeled_from_record,
    record_from_labeled,
    validate_spans,
    with_spans,
)

DEFAULT_LEASE_SECONDS = 15 * 60.0


class TaskStatus(Enum):
    PENDING = "pending"
    LEASED = "leased"
    DONE = "done"


class QueueError(Exception):
    pass


class StaleLeaseError(QueueError):
    pass


class UnknownTaskError(QueueError):
    pass


@dataclass
class ReviewTask:
    task_id: str
    round: int
    paragraph: LabeledParagraph
    status: TaskStatus = TaskStatus.PENDING
    reviewer_id: str | None = None
    lease_expiry: float | None = None
    corrected: list[Span] | None = None

    def to_payload(self) -> dict:
        rec = record_from_labeled(self.paragraph)
        return {
            "task_id": self.task_id,
            "round": self.round,
            "text": rec["text"],
            "tokens": rec["tokens"],
            "spans": rec["spans"],
        }


@dataclass
class AnnotationSubmission:
    task_id: str
    reviewer_id: str
    spans: list[Span]


class ReviewQueue:
    """In-memory queue with write-ahead event-log persistence."""

    def __init__(
        self,
        log_path: str | Path | None = None,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self._lock = threading.Lock()
        self._tasks: dict[str, ReviewTask] = {}
        self._order: list[str] = []
        self.current_round: int | None = None
        self.lease_seconds = lease_seconds
        self.clock = clock
        self.log_path = Path(log_path) if log_path is not None else None
        if self.log_path is not None and self.log_path.exists():
            self._replay()

    # -- persistence ----------------------------------------------------

    def _append_event(self, event: dict) -> None:
        if self.log_path is None:
            return
        with self.log_path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n")
            f.flush()

    def _replay(self) -> None:
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            kind = event["event"]
            if kind == "round_enqueued":
                self._apply_round(event)
            elif kind == "task_submitted":
                task = self._tasks[event["task_id"]]
                task.status = TaskStatus.DONE
                task.reviewer_id = event["reviewer_id"]
                task.corrected = [Span(**s) for s in event["spans"]]
        # Leases are deliberately not replayed: after a restart any
        # un-submitted lease is treated as expired.

    def _apply_round(self, event: dict) -> None:
        self.current_round = event["round"]
        for i, rec in enumerate(event["paragraphs"]):
            task_id = f"r{event['round']}-{i:04d}"
            lp = labeled_from_record(rec)
            self._tasks[task_id] = ReviewTask(task_id=task_id, round=event["round"], paragraph=lp)
            self._order.append(task_id)

    # -- queue operations ------------------------------------------------

    def enqueue_round(self, round_no: int, silver: list[LabeledParagraph]) -> list[str]:
        with self._lock:
            event = {
                "event": "round_enqueued",
                "round": round_no,
                "paragraphs": [record_from_labeled(lp) for lp in silver],
            }
            self._append_event(event)
            before = len(self._order)
            self._apply_round(event)
            return self._order[before:]

    def _expire_stale(self, now: float) -> None:
        for task in self._tasks.values():
            if task.status is TaskStatus.LEASED and task.lease_expiry is not None and task.lease_expiry <= now:
                task.status = TaskStatus.PENDING
                task.reviewer_id = None
                task.lease_expiry = None

    def lease_next_task(self, reviewer_id: str) -> ReviewTask | None:
        with self._lock:
            now = self.clock()
            self._expire_stale(now)
            for task_id in self._order:
                task = self._tasks[task_id]
                if task.status is TaskStatus.PENDING:
                    task.status = TaskStatus.LEASED
                    task.reviewer_id = reviewer_id
                    task.lease_expiry = now + self.lease_seconds
                    self._append_event(
                        {"event": "task_leased", "task_id": task_id, "reviewer_id": reviewer_id}
                    )
                    return task
            return None

    def submit_annotation(self, sub: AnnotationSubmission) -> ReviewTask:
        with self._lock:
            task = self._tasks.get(sub.task_id)
            if task is None:
                raise UnknownTaskError(f"unknown task {sub.task_id!r}")
            spans = sorted(sub.spans)
            if task.status is TaskStatus.DONE:
                if task.corrected == spans:
                    return task  # idempotent retry
                raise QueueError(f"task {sub.task_id} already submitted with different spans")
            now = self.clock()
            self._expire_stale(now)
            if task.status is not TaskStatus.LEASED or task.reviewer_id != sub.reviewer_id:
                raise StaleLeaseError(
                    f"task {sub.task_id} is not leased by reviewer {sub.reviewer_id!r}"
                )
            validate_spans(task.paragraph.tokens, spans, text_len=len(task.paragraph.text))
            self._append_event(
                {
                    "event": "task_submitted",
                    "task_id": task.task_id,
                    "reviewer_id": sub.reviewer_id,
                    "spans": [
                        {
                            "start": s.start,
                            "end": s.end,
                            "token_start": s.token_start,
                            "token_end": s.token_end,
                            "label": s.label,
                        }
                        for s in spans
                    ],
                }
            )
            task.status = TaskStatus.DONE
            task.corrected = spans
            return task

    def progress(self, round_no: int | None = None) -> dict:
        with self._lock:
            self._expire_stale(self.clock())
            round_no = round_no if round_no is not None else self.current_round
            counts = {s.value: 0 for s in TaskStatus}
            for task in self._tasks.values():
                if task.round == round_no:
                    counts[task.status.value] += 1
            counts["round"] = round_no
            counts["total"] = sum(counts[s.value] for s in TaskStatus)
            return counts

    def round_complete(self, round_no: int) -> bool:
        with self._lock:
            tasks = [t for t in self._tasks.values() if t.round == round_no]
            return bool(tasks) and all(t.status is TaskStatus.DONE for t in tasks)

    def max_round(self) -> int:
        with self._lock:
            return max((t.round for t in self._tasks.values()), default=0)

    def round_paragraph_keys(self, round_no: int) -> list[tuple[str, int]]:
        with self._lock:
            return [
                self._tasks[task_id].paragraph.key()
                for task_id in self._order
                if self._tasks[task_id].round == round_no
            ]

    def round_results(self, round_no: int) -> list[LabeledParagraph]:
        """Corrected paragraphs of a completed round, in task order."""
        with self._lock:
            out = []
            for task_id in self._order:
                task = self._tasks[task_id]
                if task.round != round_no:
                    continue
                if task.status is not TaskStatus.DONE:
                    raise QueueError(f"round {round_no} is not complete")
                out.append(with_spans(task.paragraph, task.corrected or [], Provenance.GOLD))
            return out


class ServiceAnnotator:
    """Annotator backed by the review queue: blocks until humans finish.

    Round numbers continue from whatever the (possibly replayed) queue
    already holds, and a verify() call whose paragraphs match the latest
    enqueued round re-attaches to it instead of enqueueing duplicates, so
    partially reviewed rounds survive an orchestrator crash.
    """

    def __init__(self, queue: ReviewQueue, poll_seconds: float = 1.0) -> None:
        self.queue = queue
        self.poll_seconds = poll_seconds

    def verify(self, silver: list[LabeledParagraph]) -> list[LabeledParagraph]:
        if not silver:
            return []
        last_round = self.queue.max_round()
        keys = [lp.key() for lp in silver]
        if last_round and self.queue.round_paragraph_keys(last_round) == keys:
            round_no = last_round
        else:
            round_no = last_round + 1
            self.queue.enqueue_round(round_no, silver)
        while not self.queue.round_complete(round_no):
            time.sleep(self.poll_seconds)
        return self.queue.round_results(round_no)


try:  # pydantic is only needed when the HTTP app is used
    from pydantic import BaseModel as _BaseModel
except ImportError:  # pragma: no cover
    _BaseModel = object


class LeaseRequest(_BaseModel):
    reviewer_id: str


class SpanPayload(_BaseModel):
    start: int
    end: int
    token_start: int
    token_end: int
    label: str = "drug"


class SubmitRequest(_BaseModel):
    reviewer_id: str
    spans: list[SpanPayload]


def create_app(queue: ReviewQueue, static_dir: str | Path | None = None):
    """FastAPI app exposing the review-queue wire protocol."""
    from fastapi import FastAPI, HTTPException, Response

    app = FastAPI(title="nerloop review service")

    @app.get("/api/rounds/current")
    def current_round():
        return queue.progress()

    @app.post("/api/tasks/lease")
    def lease(req: LeaseRequest):
        task = queue.lease_next_task(req.reviewer_id)
        if task is None:
            return Response(status_code=204)
        return task.to_payload()

    @app.post("/api/tasks/{task_id}/submit")
    def submit(task_id: str, req: SubmitRequest):
        sub = AnnotationSubmission(
            task_id=task_id,
            reviewer_id=req.reviewer_id,
            spans=[Span(**s.model_dump()) for s in req.spans],
        )
        try:
            queue.submit_annotation(sub)
        except UnknownTaskError as e:
            raise HTTPException(status_code=404, detail=str(e))
        except StaleLeaseError as e:
            raise HTTPException(status_code=409, detail=str(e))
        except (QueueError, SpanAlignmentError) as e:
            raise HTTPException(status_code=400, detail=str(e))
        return {"status": "ok", "task_id": task_id}

    @app.get("/api/progress")
    def progress():
        return queue.progress()

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
