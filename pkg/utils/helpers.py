import hashlib
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor, as_completed
from datetime import datetime

import numpy as np
from tqdm import tqdm


def get_timestamp():
    """Generate a timestamp string for file naming"""
    return datetime.now().strftime("%Y%m%d_%H%M%S")


def dataframe_to_csv(df):
    """Convert DataFrame to CSV bytes for download"""
    return df.to_csv(index=False).encode('utf-8')


def check_required_columns(df, required_columns):
    """Check if DataFrame has all required columns"""
    missing_columns = [col for col in required_columns if col not in df.columns]
    if missing_columns:
        return False, missing_columns
    return True, []


def create_batches(n_rows, batch_size):
    """Split a row count into (start, end) batch bounds"""
    return [(i, min(i + batch_size, n_rows)) for i in range(0, n_rows, batch_size)]


def atomic_write_bytes(path, payload):
    """
    Write bytes to path through a temporary file in the same directory.

    Args:
        path (str or Path): Destination file
        payload (bytes): Content to write
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp_")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def atomic_write_dataframe(path, df, index=False):
    atomic_write_text(path, df.to_csv(index=index))


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, tuple)):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def sha256_bytes(payload):
    return hashlib.sha256(payload).hexdigest()


def sha256_file(path):
    """Hash a file's content in 1 MiB chunks"""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def array_hash(array):
    """Content hash of a float64 array (shape included)"""
    array = np.ascontiguousarray(np.asarray(array, dtype=np.float64))
    header = json.dumps(list(array.shape)).encode("utf-8")
    return sha256_bytes(header + array.tobytes())


def run_grid(jobs, worker, max_workers=4, desc="Running jobs", progress=True):
    """
    Run independent jobs in a thread pool and collect results by key.

    Args:
        jobs (dict): Mapping of sortable job key -> job argument
        worker (callable): Function applied to each job argument
        max_workers (int): Maximum number of concurrent workers
        desc (str): Progress bar label
        progress (bool): Show a tqdm progress bar

    Returns:
        dict: Mapping of job key -> worker result, in sorted key order
    """
    results = {}
    if max_workers <= 1:
        for key in tqdm(sorted(jobs), desc=desc, disable=not progress):
            results[key] = worker(jobs[key])
        return {key: results[key] for key in sorted(results)}

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {executor.submit(worker, jobs[key]): key for key in sorted(jobs)}
        with tqdm(total=len(futures), desc=desc, disable=not progress) as bar:
            for future in as_completed(futures):
                # Failures propagate to the caller with the job key attached
                key = futures[future]
                try:
                    results[key] = future.result()
                except Exception as e:
                    raise RuntimeError(f"Job {key} failed: {str(e)}") from e
                bar.update(1)

    return {key: results[key] for key in sorted(results)}
