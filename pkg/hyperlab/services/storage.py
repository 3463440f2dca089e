import sqlite3
import json
import logging
from datetime import datetime, timezone
from typing import Dict, Any, List, Optional

from hyperlab.core import config
from hyperlab.schemas import RunRecord

LOG = logging.getLogger("hyperlab.storage")


def _db_path(db_path: Optional[str]) -> str:
    return db_path or config.DB_PATH


def init_db(db_path: Optional[str] = None):
    path = _db_path(db_path)
    try:
        conn = sqlite3.connect(path)
        c = conn.cursor()

        # Run history
        c.execute('''
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                timestamp TEXT,
                command TEXT,
                config_hash TEXT,
                base_seed TEXT,
                status TEXT,
                out_dir TEXT,
                summary TEXT,
                raw_json TEXT
            )
        ''')

        conn.commit()
        conn.close()
        LOG.info("Run history initialized at %s", path)
    except Exception as e:
        LOG.error("Failed to init database: %s", e)


def save_run(
    command: str,
    config_hash: str,
    base_seed: int,
    status: str,
    out_dir: Optional[str] = None,
    summary: Optional[str] = None,
    payload: Optional[Dict[str, Any]] = None,
    db_path: Optional[str] = None,
) -> Optional[int]:
    try:
        conn = sqlite3.connect(_db_path(db_path))
        c = conn.cursor()

        ts = datetime.now(timezone.utc).isoformat()
        # seeds are u64; sqlite integers are signed 64-bit
        c.execute('''
            INSERT INTO runs (timestamp, command, config_hash, base_seed, status, out_dir, summary, raw_json)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?)
        ''', (
            ts,
            command,
            config_hash,
            str(int(base_seed)),
            status,
            out_dir,
            (summary or "")[:500],
            json.dumps(payload or {}, sort_keys=True),
        ))
        run_id = c.lastrowid

        conn.commit()
        conn.close()
        return run_id
    except Exception as e:
        LOG.error("Failed to save run: %s", e)
        return None


def _record(row: sqlite3.Row) -> RunRecord:
    return RunRecord(
        id=row['id'],
        timestamp=row['timestamp'],
        command=row['command'],
        config_hash=row['config_hash'],
        base_seed=int(row['base_seed']),
        status=row['status'],
        out_dir=row['out_dir'],
        summary=row['summary'],
    )


def get_history(limit: int = 50, db_path: Optional[str] = None) -> List[RunRecord]:
    try:
        conn = sqlite3.connect(_db_path(db_path))
        conn.row_factory = sqlite3.Row
        c = conn.cursor()

        c.execute('SELECT * FROM runs ORDER BY id DESC LIMIT ?', (limit,))
        rows = c.fetchall()

        results = []
        for r in rows:
            try:
                results.append(_record(r))
            except Exception as e:
                LOG.warning("Failed to parse history item: %s", e)

        conn.close()
        return results
    except Exception as e:
        LOG.error("Failed to get history: %s", e)
        return []


def get_run_by_id(run_id: int, db_path: Optional[str] = None) -> Optional[Dict[str, Any]]:
    """The stored record plus its JSON payload under ``payload``."""
    try:
        conn = sqlite3.connect(_db_path(db_path))
        conn.row_factory = sqlite3.Row
        c = conn.cursor()
        c.execute('SELECT * FROM runs WHERE id = ?', (run_id,))
        row = c.fetchone()
        conn.close()

        if row:
            out = _record(row).model_dump()
            out["payload"] = json.loads(row['raw_json'] or "{}")
            return out
        return None
    except Exception as e:
        LOG.error("Failed to get run by id: %s", e)
        return None


def get_stats(db_path: Optional[str] = None) -> Dict[str, Any]:
    stats = {
        "total_runs": 0,
        "command_counts": {},
        "status_counts": {},
    }
    try:
        conn = sqlite3.connect(_db_path(db_path))
        c = conn.cursor()

        c.execute('SELECT count(*) from runs')
        stats["total_runs"] = c.fetchone()[0]

        c.execute('SELECT command, count(*) FROM runs GROUP BY command')
        for command, count in c.fetchall():
            stats["command_counts"][command] = count

        c.execute('SELECT status, count(*) FROM runs GROUP BY status')
        for status, count in c.fetchall():
            stats["status_counts"][status] = count

        conn.close()
    except Exception as e:
        LOG.error("Failed to get stats: %s", e)

    return stats
