"""Song library over a data directory: imported songs as text records."""

from __future__ import annotations

import re
from pathlib import Path

from .errors import UnknownSong
from .midi import SongScore, parse_smf, song_from_text, song_to_text

_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


def slugify(name: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9_-]+", "-", name).strip("-")
    return slug or "song"


class SongLibrary:
    def __init__(self, data_dir: str | Path):
        self.songs_dir = Path(data_dir) / "songs"

    def _path(self, song_id: str) -> Path:
        if not _ID_RE.match(song_id):
            raise ValueError(f"song id {song_id!r} may only contain [A-Za-z0-9_-]")
        return self.songs_dir / f"{song_id}.song"

    def import_smf(self, data: bytes, song_id: str = "", title: str = "") -> SongScore:
        song = parse_smf(data, song_id=song_id or "song", title=title)
        if song_id:
            song.id = song_id
        return self.save(song)

    def save(self, song: SongScore) -> SongScore:
        path = self._path(song.id)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(song_to_text(song))
        return song

    def get(self, song_id: str) -> SongScore:
        path = self._path(song_id)
        if not path.exists():
            raise UnknownSong(f"song {song_id!r} is not in the library")
        return song_from_text(path.read_text())

    def exists(self, song_id: str) -> bool:
        return self._path(song_id).exists()

    def list_ids(self) -> list[str]:
        if not self.songs_dir.exists():
            return []
        return sorted(p.stem for p in self.songs_dir.glob("*.song"))
