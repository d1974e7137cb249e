"""Rebuild MovieLens 100K ``u.data`` / ``u.item`` from the copy bundled in the recbole wheel.

The GroupLens host is not always reachable; recbole ships the same 100,000
ratings as atomic files, so we download that wheel and convert it back into
the original tab/pipe separated layout.

    python scripts/fetch_movielens.py data/ml-100k
"""
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
PREFIX = "recbole/dataset_example/ml-100k/"


def main(out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "recbole==1.2.1"],
            check=True,
        )
        wheel = next(Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            inter = zf.read(PREFIX + "ml-100k.inter").decode("latin-1").splitlines()[1:]
            items = zf.read(PREFIX + "ml-100k.item").decode("latin-1").splitlines()[1:]

    with open(out / "u.data", "w", encoding="latin-1", newline="\n") as fh:
        for line in inter:
            user, item, rating, ts = line.split("\t")
            fh.write(f"{user}\t{item}\t{int(float(rating))}\t{int(float(ts))}\n")

    rows = []
    for line in items:
        item, title, year, classes = (line.split("\t") + ["", "", ""])[:4]
        tags = set(classes.split())
        flags = "|".join("1" if g in tags else "0" for g in GENRES)
        date = f"01-Jan-{year}" if year else ""
        rows.append((int(item), f"{item}|{title}|{date}||http://us.imdb.com/|{flags}\n"))
    with open(out / "u.item", "w", encoding="latin-1", newline="\n") as fh:
        fh.writelines(r for _, r in sorted(rows))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/ml-100k")
