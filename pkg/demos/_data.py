"""Shared dataset lookup for the demo scripts."""
import os
from pathlib import Path

from gbsc import load_dataset

DATA = Path(os.environ.get("GBSC_DATA", Path(__file__).resolve().parents[1] / "data" / "agaricus-lepiota.data"))


def dataset():
    return load_dataset(DATA)
