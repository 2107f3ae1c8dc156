"""Shared test utilities: a tiny scriptable HTTP JSON server and table builders."""

from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer


class MockJsonServer:
    """Serves canned JSON responses; records request bodies.

    ``responder`` is a callable (path, payload) -> (status, json-serializable).
    """

    def __init__(self, responder):
        self.responder = responder
        self.requests: list[tuple[str, dict]] = []
        self.headers: list[dict] = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length) or b"{}")
                outer.requests.append((self.path, payload))
                outer.headers.append(dict(self.headers))
                status, body = outer.responder(self.path, payload)
                data = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = HTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def __enter__(self):
        self._thread.start()
        return self

    @property
    def url(self) -> str:
        return "http://127.0.0.1:%d" % self._server.server_port

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()


WORDS = (
    "amber basin cedar delta ember frost grove harbor inlet juniper kestrel "
    "lumen meadow nectar orchid prairie quartz ridge summit thicket umber "
    "vernal willow yonder zephyr anchor bramble crest dune estuary fjord "
    "glacier hollow isthmus knoll lagoon mesa nook outcrop pinnacle ravine "
    "shoal tundra upland vista wharf atoll bluff cove drift eddy"
).split()

CITIES = (
    "Taipei Kaohsiung Evanston Chicago Geneva Nairobi Lagos Lima Quito Oslo "
    "Bergen Porto Seville Dakar Hanoi Osaka Sapporo Busan Davao Cebu Arequipa "
    "Cusco Valparaiso Mendoza Rosario Brno Gdansk Tartu Kaunas Turku"
).split()

COUNTRIES = (
    "Taiwan Kenya Nigeria Peru Ecuador Norway Portugal Spain Senegal Vietnam "
    "Japan Korea Philippines Argentina Chile Czechia Poland Estonia Lithuania "
    "Finland Iceland Uruguay Bolivia Ghana Morocco"
).split()

FIRST_NAMES = (
    "Ada Ben Cora Dev Elif Fumi Gael Hana Imre Jun Kai Lena Mina Nuru Owen "
    "Pia Quim Rosa Sana Tomo Uma Vera Wafa Ximo Yuna Zola"
).split()

LAST_NAMES = (
    "Stone Rivers Field Woods Marsh Hale Frost Lake Hart Vale Moss Reed "
    "Cross Knight Bell Fox Ash Snow Wells Burke Crane Dale Finch Gray"
).split()

COLOR_WORDS = (
    "crimson teal ochre indigo sage coral slate amber violet moss pearl "
    "cobalt rust ivory jade plum sand mint onyx rose"
).split()


def make_demo_rows(n_rows: int, seed: int) -> tuple[list[str], list[list[str]]]:
    """Synthetic 12-column table with mixed data types and shared vocabularies."""
    rng = random.Random(seed)
    header = [
        "record_id",
        "person_name",
        "email",
        "city",
        "country",
        "favorite_color",
        "homepage",
        "signup_date",
        "price_usd",
        "views",
        "rating",
        "description",
    ]
    rows = []
    for i in range(n_rows):
        first = rng.choice(FIRST_NAMES)
        last = rng.choice(LAST_NAMES)
        city = rng.choice(CITIES)
        country = rng.choice(COUNTRIES)
        color = rng.choice(COLOR_WORDS)
        desc = " ".join(rng.choice(WORDS) for _ in range(rng.randrange(4, 9)))
        rows.append(
            [
                str(10_000 + i),
                "%s %s" % (first, last),
                "%s.%s%d@example.org" % (first.lower(), last.lower(), rng.randrange(100)),
                city,
                country,
                color,
                "https://example.org/u/%d" % rng.randrange(100_000),
                "20%02d-%02d-%02d" % (rng.randrange(10, 24), rng.randrange(1, 13), rng.randrange(1, 29)),
                "$%d.%02d" % (rng.randrange(5, 900), rng.randrange(100)),
                str(rng.randrange(0, 2_000_000)),
                "%.1f" % (1 + rng.random() * 4),
                desc,
            ]
        )
    return header, rows


# word lengths shared by every pool so length statistics cannot tell columns apart
_POOL_LENGTHS = [4, 4, 4, 4, 5, 5, 5, 5, 5, 6, 6, 6, 6, 6, 7, 7, 7, 7, 7, 8, 8, 8, 8, 8]

CONFUSABLE_COLUMNS = ("alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel")


def _word_pool(pool_id: int) -> list[str]:
    rng = random.Random(9_000 + pool_id)
    letters = "abcdefghijklmnopqrstuvwxyz"
    return ["".join(rng.choice(letters) for _ in range(n)) for n in _POOL_LENGTHS]


def make_confusable_rows(n_rows: int, seed: int) -> tuple[list[str], list[list[str]]]:
    """Table whose six word columns share length and character statistics.

    Each word column draws from its own fixed vocabulary, so value content
    (not value statistics) is what identifies a column. Mixed-type columns
    (id, currency, date, url) round out the table.
    """
    rng = random.Random(seed)
    pools = [_word_pool(k) for k in range(len(CONFUSABLE_COLUMNS))]
    header = ["record_id", *CONFUSABLE_COLUMNS, "amount", "created", "homepage"]
    rows = []
    for i in range(n_rows):
        rows.append(
            [
                str(50_000 + i),
                *[rng.choice(pool) for pool in pools],
                "$%d.%02d" % (rng.randrange(3, 700), rng.randrange(100)),
                "20%02d-%02d-%02d" % (rng.randrange(8, 24), rng.randrange(1, 13), rng.randrange(1, 29)),
                "https://example.org/r/%d" % rng.randrange(1_000_000),
            ]
        )
    return header, rows


def write_demo_csv(path, n_rows: int, seed: int) -> str:
    import csv

    header, rows = make_demo_rows(n_rows, seed)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return str(path)
