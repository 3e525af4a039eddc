"""Print the genealogy of a ten-member child community built by hand.

AskThe_Donald's first ten members join an hour apart.  u1 posted in
The_Donald during the preceding month, u2 in The_Donald and politics, u3 only
has a stale politics post, and the rest have no history.
"""
from genealogy.corpus import Event, build_index
from genealogy.graph import DEFAULT_WINDOW, parent_edges

DAY = 86_400
T0 = 1_400_000_000


def main():
    events = [
        Event("founder_td", "The_Donald", T0 - 300 * DAY, "t"),
        Event("founder_pol", "politics", T0 - 900 * DAY, "t"),
        Event("u1", "The_Donald", T0 - 2 * DAY, "t"),
        Event("u2", "The_Donald", T0 - 5 * DAY, "t"),
        Event("u2", "politics", T0 - 1 * DAY, "t"),
        Event("u3", "politics", T0 - 40 * DAY, "t"),
    ]
    events += [Event(f"u{r}", "AskThe_Donald", T0 + (r - 1) * 3600, "t") for r in range(1, 11)]
    edges, stats = parent_edges("AskThe_Donald", 10, DEFAULT_WINDOW, build_index(events))
    for e in edges:
        print(f"{e.parent:>12} -> {e.child}  weight {e.weight:g}")
    for name, value in stats.as_dict().items():
        print(f"{name:>24}: {value}")


if __name__ == "__main__":
    main()
