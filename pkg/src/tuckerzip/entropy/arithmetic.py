"""Integer arithmetic coder with an adaptive, escape-based frequency model.

The model starts with only an escape slot. A symbol seen for the first time
is sent as an escape followed by its value as a raw 32-bit integer (two
uniform 16-bit symbols); afterwards it has its own slot. Every use adds
``INCREMENT`` to a slot's count, and all counts are halved once the total
reaches ``LIMIT``.
"""

from .bitio import BitReader, BitWriter, DecodeError

STATE_BITS = 32
FULL = (1 << STATE_BITS) - 1
HALF = 1 << (STATE_BITS - 1)
QUARTER = 1 << (STATE_BITS - 2)
THREE_QUARTERS = 3 * QUARTER

INCREMENT = 32
LIMIT = 1 << 16
RAW_TOTAL = 1 << 16
MAX_SYMBOL = (1 << 32) - 1


class AdaptiveModel:
    """Symbol counts kept in a Fenwick tree; slot 0 is the escape."""

    def __init__(self):
        self.values = [None]
        self.slots = {}
        self.counts = [INCREMENT]
        self.total = INCREMENT
        self._capacity = 16
        self._rebuild()

    def _rebuild(self):
        while self._capacity < len(self.counts):
            self._capacity *= 2
        tree = [0] * (self._capacity + 1)
        tree[1:len(self.counts) + 1] = self.counts
        for i in range(1, self._capacity + 1):
            j = i + (i & -i)
            if j <= self._capacity:
                tree[j] += tree[i]
        self.tree = tree

    def _add(self, slot, delta):
        i = slot + 1
        tree = self.tree
        cap = self._capacity
        while i <= cap:
            tree[i] += delta
            i += i & -i

    def cumulative(self, slot):
        """Sum of counts of slots below ``slot``."""
        s = 0
        i = slot
        tree = self.tree
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def find(self, target):
        """Slot whose cumulative interval contains ``target``; returns (slot, low)."""
        pos = 0
        low = 0
        tree = self.tree
        step = self._capacity
        while step:
            nxt = pos + step
            if nxt <= self._capacity and low + tree[nxt] <= target:
                pos = nxt
                low += tree[nxt]
            step >>= 1
        return pos, low

    def update(self, slot):
        self.counts[slot] += INCREMENT
        self.total += INCREMENT
        self._add(slot, INCREMENT)
        if self.total >= LIMIT:
            self.counts = [(c + 1) >> 1 for c in self.counts]
            self.total = sum(self.counts)
            self._rebuild()

    def add_symbol(self, value):
        self.slots[value] = len(self.values)
        self.values.append(value)
        self.counts.append(INCREMENT)
        self.total += INCREMENT
        if len(self.counts) > self._capacity:
            self._rebuild()
        else:
            self._add(len(self.counts) - 1, INCREMENT)
        if self.total >= LIMIT:
            self.counts = [(c + 1) >> 1 for c in self.counts]
            self.total = sum(self.counts)
            self._rebuild()


class _Encoder:
    def __init__(self):
        self.low = 0
        self.high = FULL
        self.pending = 0
        self.out = BitWriter()

    def encode(self, cum_low, cum_high, total):
        rng = self.high - self.low + 1
        self.high = self.low + rng * cum_high // total - 1
        self.low = self.low + rng * cum_low // total
        out = self.out
        while True:
            if self.high < HALF:
                out.write(0)
                for _ in range(self.pending):
                    out.write(1)
                self.pending = 0
            elif self.low >= HALF:
                out.write(1)
                for _ in range(self.pending):
                    out.write(0)
                self.pending = 0
                self.low -= HALF
                self.high -= HALF
            elif self.low >= QUARTER and self.high < THREE_QUARTERS:
                self.pending += 1
                self.low -= QUARTER
                self.high -= QUARTER
            else:
                break
            self.low <<= 1
            self.high = (self.high << 1) | 1

    def finish(self):
        self.pending += 1
        bit = 0 if self.low < QUARTER else 1
        self.out.write(bit)
        for _ in range(self.pending):
            self.out.write(bit ^ 1)
        return self.out.getvalue()


class _Decoder:
    def __init__(self, data):
        self.reader = BitReader(data, strict=False)
        self.low = 0
        self.high = FULL
        self.value = self.reader.read_bits(STATE_BITS)

    def target(self, total):
        rng = self.high - self.low + 1
        return ((self.value - self.low + 1) * total - 1) // rng

    def consume(self, cum_low, cum_high, total):
        rng = self.high - self.low + 1
        self.high = self.low + rng * cum_high // total - 1
        self.low = self.low + rng * cum_low // total
        read = self.reader.read
        while True:
            if self.high < HALF:
                pass
            elif self.low >= HALF:
                self.low -= HALF
                self.high -= HALF
                self.value -= HALF
            elif self.low >= QUARTER and self.high < THREE_QUARTERS:
                self.low -= QUARTER
                self.high -= QUARTER
                self.value -= QUARTER
            else:
                break
            self.low <<= 1
            self.high = (self.high << 1) | 1
            self.value = (self.value << 1) | read()


def ac_encode(symbols):
    """Encode nonnegative integers below 2**32; an empty input gives ``b''``."""
    symbols = list(symbols)
    if not symbols:
        return b""
    model = AdaptiveModel()
    enc = _Encoder()
    slots = model.slots
    for s in symbols:
        slot = slots.get(s)
        if slot is None:
            if not 0 <= s <= MAX_SYMBOL:
                raise ValueError(f"symbol {s} outside the 32-bit alphabet")
            enc.encode(0, model.counts[0], model.total)
            model.update(0)
            enc.encode(s >> 16, (s >> 16) + 1, RAW_TOTAL)
            enc.encode(s & 0xFFFF, (s & 0xFFFF) + 1, RAW_TOTAL)
            model.add_symbol(s)
        else:
            low = model.cumulative(slot)
            enc.encode(low, low + model.counts[slot], model.total)
            model.update(slot)
    return enc.finish()


def ac_decode(data, count):
    if count == 0:
        return []
    model = AdaptiveModel()
    dec = _Decoder(data)
    out = []
    limit = 8 * len(data) + 2 * STATE_BITS
    for _ in range(count):
        t = dec.target(model.total)
        if not 0 <= t < model.total:
            raise DecodeError("arithmetic stream is corrupt")
        slot, low = model.find(t)
        if slot >= len(model.counts):
            raise DecodeError("arithmetic stream is corrupt")
        dec.consume(low, low + model.counts[slot], model.total)
        model.update(slot)
        if slot == 0:
            hi = dec.target(RAW_TOTAL)
            dec.consume(hi, hi + 1, RAW_TOTAL)
            lo = dec.target(RAW_TOTAL)
            dec.consume(lo, lo + 1, RAW_TOTAL)
            value = (hi << 16) | lo
            if value in model.slots:
                raise DecodeError("arithmetic stream escapes a known symbol")
            model.add_symbol(value)
        else:
            value = model.values[slot]
        out.append(value)
        if dec.reader.position > limit:
            raise DecodeError("arithmetic stream ended early")
    return out
