from app.data.dataset import LabeledSet, load_spectrogram_set, prepare_cache
from app.data.manifest import Manifest, ManifestEntry, load_manifest, write_manifest
from app.data.reference import CorpusCounts, table_one_counts
from app.data.split import stratified_split
from app.data.toy import ToySpec, ToySynth, default_toy_spec, gen_toy

__all__ = [
    "CorpusCounts",
    "LabeledSet",
    "Manifest",
    "ManifestEntry",
    "ToySpec",
    "ToySynth",
    "default_toy_spec",
    "gen_toy",
    "load_manifest",
    "load_spectrogram_set",
    "prepare_cache",
    "stratified_split",
    "table_one_counts",
    "write_manifest",
]
