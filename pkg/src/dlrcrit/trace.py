"""Per-iteration bookkeeping shared by all eigenvalue solvers."""
from dataclasses import dataclass, field


@dataclass(frozen=True)
class TraceRecord:
    n: int
    k: float
    delta: float
    rank: int
    theta: float
    cost: float


@dataclass
class IterationTrace:
    """Ordered :class:`TraceRecord` rows.

    ``cost`` is cumulative: every low-rank iteration adds its rank (full
    iterations add ``min(N_x, G)``), so it counts iterations weighted by rank.
    """

    records: list = field(default_factory=list)

    def append(self, k, delta, rank, theta, cost_increment):
        n = self.records[-1].n + 1 if self.records else 1
        cost = (self.records[-1].cost if self.records else 0) + cost_increment
        self.records.append(TraceRecord(n, float(k), float(delta), int(rank), float(theta), cost))

    def extend(self, other, extra_cost=0):
        """Append ``other``'s rows, renumbered and with costs offset."""
        prev = 0
        for i, rec in enumerate(other.records):
            self.append(rec.k, rec.delta, rec.rank, rec.theta,
                        (rec.cost - prev) + (extra_cost if i == 0 else 0))
            prev = rec.cost

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def total_cost(self):
        return self.records[-1].cost if self.records else 0

    @property
    def ranks(self):
        return [r.rank for r in self.records]

    @property
    def ks(self):
        return [r.k for r in self.records]

    @property
    def average_rank(self):
        """Mean rank over all recorded iterations."""
        if not self.records:
            return 0.0
        return sum(self.ranks) / len(self.records)

    def __eq__(self, other):
        return isinstance(other, IterationTrace) and self.records == other.records
