"""Corpus builders and straight-line oracles shared by the test modules.

The oracles deliberately work on raw event lists and avoid the index and the
package's own helpers, so agreement with the pipeline is a real cross-check.
"""
import math
from collections import Counter, defaultdict

from genealogy.corpus import Event

DAY = 86_400
WINDOW = 30 * DAY
T0 = 1_400_000_000


def post(user, community, t, title="t", body="b", feedback=1):
    return Event(user, community, t, title, body, feedback)


def worked_example_events(extra_members=0):
    """AskThe_Donald's first ten members u1..u10 joining in order.

    u1 posted in The_Donald during the month before joining, u2 in The_Donald
    and politics; u3 has only a stale politics post from 40 days earlier and
    u4..u10 have no other posts.  ``extra_members`` history-free users join
    after u10.
    """
    events = [
        post("founder_td", "The_Donald", T0 - 300 * DAY),
        post("founder_pol", "politics", T0 - 900 * DAY),
        post("u1", "The_Donald", T0 - 2 * DAY),
        post("u2", "The_Donald", T0 - 5 * DAY),
        post("u2", "politics", T0 - 1 * DAY),
        post("u3", "politics", T0 - 40 * DAY),
    ]
    n = 10 + extra_members
    for r in range(1, n + 1):
        events.append(post(f"u{r}", "AskThe_Donald", T0 + (r - 1) * 3600))
    # activity after joining never counts toward the child's genealogy
    events.append(post("u5", "politics", T0 + 20 * DAY))
    return events


def first_members(events, community):
    first = {}
    for e in events:
        if e.community_id == community and (e.user_id not in first or e.timestamp < first[e.user_id]):
            first[e.user_id] = e.timestamp
    return sorted(first.items(), key=lambda ut: (ut[1], ut[0]))


def creation_times(events):
    out = {}
    for e in events:
        out[e.community_id] = min(out.get(e.community_id, e.timestamp), e.timestamp)
    return out


def brute_force_genealogy(events, child, k, window=WINDOW, thresholds=(0.05, 0.1)):
    """Scan every post of each early member: (weights, stats dict)."""
    created = creation_times(events)
    members = first_members(events, child)[:k]
    assert len(members) == k
    hits = defaultdict(int)
    with_history = 0
    for user, t in members:
        recent = set()
        for e in events:
            if (e.user_id == user and t - window <= e.timestamp < t
                    and created[e.community_id] < created[child]):
                recent.add(e.community_id)
        for c in recent:
            hits[c] += 1
        with_history += bool(recent)
    weights = {c: n / k for c, n in hits.items()}
    stats = {
        "num_parents": len(weights),
        "max_parent_weight": max(weights.values(), default=0.0),
        "fraction_new_users": 1.0 - with_history / k,
    }
    for th in thresholds:
        stats[f"num_parents_w>={th:g}"] = sum(1 for n in hits.values() if n * 1000 >= th * 1000 * k)
    return weights, stats


def oracle_js(train_a, train_b, alpha):
    """Direct summation over the union vocabulary plus one shared out-of-vocabulary
    outcome carrying each model's unseen mass."""
    ca, cb = Counter(train_a), Counter(train_b)
    na = len(train_a) + alpha * (len(ca) + 1)
    nb = len(train_b) + alpha * (len(cb) + 1)
    outcomes = []
    for t in set(ca) | set(cb):
        outcomes.append(((ca[t] + alpha) / na if t in ca else 0.0,
                         (cb[t] + alpha) / nb if t in cb else 0.0))
    outcomes.append((alpha / na, alpha / nb))
    total = 0.0
    for p, q in outcomes:
        m = (p + q) / 2
        if p:
            total += 0.5 * p * math.log2(p / m)
        if q:
            total += 0.5 * q * math.log2(q / m)
    return total
