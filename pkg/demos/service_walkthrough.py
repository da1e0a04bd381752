# Talk to the HTTP service in-process, the way a client would over the wire.
# To run it for real: `depmap serve --bind 127.0.0.1:8080`.

import shutil
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from depmap.service import ROUTE, create_app

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "two_graphs"
repo = Path(tempfile.mkdtemp()) / "repo"
shutil.copytree(FIXTURE, repo)

client = TestClient(create_app(cache_ttl=60))
cache = client.app.state.cache
print(client.get("/healthz").json())

# +
r = client.post(ROUTE, json={"repoPath": str(repo), "filter": "A2"})
print(r.status_code, r.json()["models"][0]["sources"])

# Asking again is served from the cache.
client.post(ROUTE, json={"repoPath": str(repo), "filter": "A2"})
print("hits", cache.hits, "misses", cache.misses)

# +
# Any byte change in an artifact changes the content hash, so the next
# request recomputes. Here Train2 stops projecting labels.csv.
train2 = repo / "aml" / "Train2.py"
train2.write_text(train2.read_text().replace('labels[["label"]]', "labels"))
r = client.post(ROUTE, json={"repoPath": str(repo), "filter": "A2"})
print("hits", cache.hits, "misses", cache.misses)
print([s for s in r.json()["models"][0]["sources"] if s["symbol"] == "labels.csv"])

# +
# Request problems are 400, repositories that cannot be analyzed are 422.
print(client.post(ROUTE, json={"repo": "x"}).json())
print(client.post(ROUTE, json={"repoPath": "/nonexistent"}).json())
