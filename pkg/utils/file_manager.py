"""Run-directory file management: checkpoints, vocabularies, metrics tables and reports."""

import logging
import uuid
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

from constants import CHECKPOINT_FILENAME, MAX_FILES_TO_KEEP, METRICS_FILENAME, VOCAB_FILENAME

logger = logging.getLogger(__name__)


class RunFileManager:
    """Handles file operations inside one run output directory."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    @property
    def checkpoint_path(self) -> Path:
        return self.out_dir / CHECKPOINT_FILENAME

    @property
    def vocab_path(self) -> Path:
        return self.out_dir / VOCAB_FILENAME

    @property
    def metrics_path(self) -> Path:
        return self.out_dir / METRICS_FILENAME

    def step_checkpoint_path(self, step: int) -> Path:
        return self.out_dir / f"step_{step:07d}.ckpt"

    def generate_filename(self, data_type: str, extension: str = "txt") -> Path:
        """Report filename with timestamp and a short unique id."""
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        unique_id = str(uuid.uuid4())[:8]
        return self.out_dir / f"qbert_{data_type}_{timestamp}_{unique_id}.{extension}"

    def save_metrics(self, rows: Sequence[Dict], columns: List[str], filename: Optional[Path] = None) -> Path:
        """Write metric rows as CSV with a fixed column order."""
        path = filename or self.metrics_path
        frame = pd.DataFrame(list(rows), columns=columns)
        try:
            frame.to_csv(path, index=False, float_format="%.10g")
            logger.info(f"Metrics saved to {path} ({len(frame)} rows)")
        except OSError as e:
            logger.error(f"Failed to save metrics to {path}: {e}")
            raise
        return path

    def load_metrics(self, filename: Optional[Union[str, Path]] = None) -> pd.DataFrame:
        path = Path(filename) if filename is not None else self.metrics_path
        try:
            return pd.read_csv(path)
        except FileNotFoundError:
            logger.error(f"File not found: {path}")
            raise

    def cleanup_old_files(self, pattern: str = "step_*.ckpt") -> None:
        """Keep only the newest MAX_FILES_TO_KEEP files matching ``pattern``."""
        files = sorted(self.out_dir.glob(pattern))
        if len(files) > MAX_FILES_TO_KEEP:
            for old_file in files[:-MAX_FILES_TO_KEEP]:
                try:
                    old_file.unlink()
                    logger.info(f"Cleaned up old file: {old_file}")
                except OSError as e:
                    logger.warning(f"Could not remove {old_file}: {e}")
