import pytest

from app.data import Manifest, ManifestEntry, load_manifest, write_manifest
from app.exceptions import LabelError, ManifestError
from app.schema import Split


def build_manifest_text(rows):
    return "filepath,synthesizer,split,known\n" + "\n".join(rows) + "\n"


def test_load_manifest_parses_rows(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_text(
        build_manifest_text(
            [
                "train/a/0.wav,alpha,train,true",
                "train/b/0.wav,beta,TRAIN,1",
                "test/a/0.wav,alpha,test,yes",
                "test/u/0.wav,gamma,test,false",
            ]
        )
    )

    manifest = load_manifest(path)

    assert len(manifest) == 4
    assert manifest.root == tmp_path
    assert manifest.class_names == ["alpha", "beta"]
    assert manifest.unknown_names == ["gamma"]
    assert manifest.class_index("beta") == 1
    assert [e.filepath for e in manifest.select(Split.TEST)] == ["test/a/0.wav", "test/u/0.wav"]
    assert manifest.resolve(manifest.entries[0]) == tmp_path / "train/a/0.wav"


def test_manifest_survives_write_and_load(tmp_path):
    manifest = Manifest(
        entries=[
            ManifestEntry(filepath="x.wav", synthesizer="alpha", split=Split.TRAIN, known=True),
            ManifestEntry(filepath="y.wav", synthesizer="omega", split=Split.TEST, known=False),
        ],
        root=tmp_path,
    )

    path = write_manifest(tmp_path / "m.csv", manifest, {"seed": 3})

    assert path.read_text().startswith("# ")
    assert load_manifest(path).entries == manifest.entries


@pytest.mark.parametrize(
    "rows, needle",
    [
        (["a.wav,alpha,train,true", "a.wav,alpha,test,true"], "duplicate"),
        (["a.wav,alpha,train,false"], "train split"),
        (["a.wav,alpha,train,true", "b.wav,alpha,test,false"], "both known and unknown"),
        (["a.wav,alpha,validation,true"], "split must be"),
        (["a.wav,alpha,train,maybe"], "known must be"),
        ([",alpha,train,true"], "empty"),
    ],
)
def test_invalid_manifest_rows(tmp_path, rows, needle):
    path = tmp_path / "manifest.csv"
    path.write_text(build_manifest_text(rows))

    with pytest.raises(ManifestError, match=needle):
        load_manifest(path)


def test_missing_columns(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_text("filepath,synthesizer\na.wav,alpha\n")

    with pytest.raises(ManifestError, match="missing columns"):
        load_manifest(path)


def test_missing_manifest_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path / "absent.csv")


def test_unknown_class_name_is_a_label_error():
    manifest = Manifest(entries=[ManifestEntry(filepath="a.wav", synthesizer="alpha", split=Split.TRAIN, known=True)])

    with pytest.raises(LabelError):
        manifest.class_index("beta")
