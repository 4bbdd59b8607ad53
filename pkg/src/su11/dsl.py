"""The ``.circ`` circuit language.

One declaration per line, ``#`` starts a comment::

    modes 2
    seed 0 10 0                 # mode, Re(alpha), Im(alpha)
    nlo 0 1 gain=4 pump=0
    loss 0 eta=0.9
    phase 0 phi=0.1             # the first phase line is the estimated phase
    nlo 0 1 gain=4 pump=pi
    detect nsum 0 1

Detector kinds are ``nsum`` (total photon number of the listed modes),
``n`` (one mode), ``quad``, ``lquad`` (``lambda`` weights the second mode)
and ``quad2`` (square of the ``quad`` sum); the quadrature kinds take
``theta_a``, ``theta_b`` (default ``pi/2``) and ``lambda`` (default 1).
Numbers may be ``pi``-expressions such as ``pi/2``, ``-3*pi/4`` or
``2*(pi - 0.1)``.

:func:`parse` turns text into a :class:`CircuitAst` or raises
:class:`CircSyntaxError` / :class:`CircSemanticError`, both carrying a
:class:`Span`.  :func:`compile_ast` produces a :class:`Pipeline` and
:func:`render` writes canonical text back.
"""
import math
import re
from dataclasses import dataclass, field

from ._validation import DomainError
from .circuit import NLO, Circuit, Detector, Loss, Observable, Phase, Seed

DETECTOR_KINDS = {
    "nsum": Observable.M_N,
    "n": Observable.M_Nb,
    "quad": Observable.M_Q,
    "lquad": Observable.M_lambdaQ,
    "quad2": Observable.M_Q2,
}
_KIND_NAMES = {v: k for k, v in DETECTOR_KINDS.items()}
# number of detector modes each kind accepts
_DETECTOR_ARITY = {"nsum": (1, 2), "n": (1,), "quad": (1, 2), "lquad": (2,), "quad2": (1, 2)}
_KEYWORDS = ("modes", "seed", "nlo", "loss", "phase", "detect")
# (required keys, optional keys with defaults)
_OPTIONS = {
    "nlo": ({"gain"}, {"pump": 0.0}),
    "loss": ({"eta"}, {}),
    "phase": (set(), {"phi": 0.0}),
    "detect": (set(), {"theta_a": math.pi / 2, "theta_b": math.pi / 2, "lambda": 1.0}),
}
MAX_MODES = 64
MAX_NESTING = 64


@dataclass(frozen=True)
class Span:
    """1-based line and column range ``[col, end_col)`` of a node."""

    line: int
    col: int
    end_col: int

    def to_dict(self):
        return {"line": self.line, "col": self.col, "end_col": self.end_col}


class CircError(DomainError):
    kind = "error"

    def __init__(self, message, span, expected=()):
        self.message = message
        self.span = span
        self.expected = tuple(sorted(expected))
        where = f"line {span.line}, col {span.col}"
        hint = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{where}: {message}{hint}")

    def to_dict(self):
        return {"error": self.kind, "message": self.message, "span": self.span.to_dict(),
                "expected": list(self.expected)}


class CircSyntaxError(CircError):
    kind = "syntax_error"


class CircSemanticError(CircError):
    kind = "semantic_error"


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class ModesDecl:
    n: int
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class SeedDecl:
    mode: int
    re: float
    im: float
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class NloDecl:
    mode_a: int
    mode_b: int
    gain: float
    pump: float
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class LossDecl:
    mode: int
    eta: float
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class PhaseDecl:
    mode: int
    phi: float
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class DetectDecl:
    kind: str
    modes: tuple
    theta_a: float
    theta_b: float
    lam: float
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class CircuitAst:
    declarations: tuple

    @property
    def n_modes(self):
        return self.declarations[0].n

    @property
    def detectors(self):
        return tuple(d for d in self.declarations if isinstance(d, DetectDecl))


# -- numeric expressions -------------------------------------------------------

_NUM_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)|(pi)|([-+*/()]))")


class _Expr:
    """Recursive-descent evaluator for ``pi``-expressions."""

    def __init__(self, text, span):
        self.text = text
        self.span = span
        self.tokens = []
        pos = 0
        stripped = text.rstrip()
        while pos < len(stripped):
            m = _NUM_TOKEN.match(stripped, pos)
            if not m or m.end() == pos:
                raise CircSyntaxError(f"bad character in number {text!r}", self._at(pos),
                                      {"number", "pi", "+", "-", "*", "/", "(", ")"})
            kind = "num" if m.group(1) else "pi" if m.group(2) else m.group(3)
            self.tokens.append((kind, m.group(1) or m.group(2) or m.group(3), m.start(m.lastindex)))
            pos = m.end()
        self.i = 0
        self.depth = 0

    def _at(self, offset):
        col = self.span.col + offset
        return Span(self.span.line, col, col + 1)

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text))

    def value(self):
        if not self.tokens:
            raise CircSyntaxError("empty number", self.span, {"number", "pi"})
        v = self._sum()
        kind, tok, pos = self._peek()
        if kind is not None:
            raise CircSyntaxError(f"unexpected {tok!r} in number", self._at(pos),
                                  {"+", "-", "*", "/"})
        if not math.isfinite(v):
            raise CircSemanticError(f"number {self.text!r} is not finite", self.span)
        return v

    def _sum(self):
        v = self._product()
        while self._peek()[0] in ("+", "-"):
            op = self.tokens[self.i][0]
            self.i += 1
            rhs = self._product()
            v = v + rhs if op == "+" else v - rhs
        return v

    def _product(self):
        v = self._unary()
        while self._peek()[0] in ("*", "/"):
            op, _, pos = self.tokens[self.i]
            self.i += 1
            rhs = self._unary()
            if op == "/" and rhs == 0:
                raise CircSemanticError("division by zero", self._at(pos))
            v = v * rhs if op == "*" else v / rhs
        return v

    def _unary(self):
        kind, _, pos = self._peek()
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise CircSyntaxError("number expression nested too deeply", self._at(pos))
        try:
            if kind in ("+", "-"):
                self.i += 1
                v = self._unary()
                return -v if kind == "-" else v
            return self._atom()
        finally:
            self.depth -= 1

    def _atom(self):
        kind, tok, pos = self._peek()
        if kind == "num":
            self.i += 1
            return float(tok)
        if kind == "pi":
            self.i += 1
            return math.pi
        if kind == "(":
            self.i += 1
            v = self._sum()
            if self._peek()[0] != ")":
                raise CircSyntaxError("unclosed parenthesis", self._at(self._peek()[2]), {")"})
            self.i += 1
            return v
        what = "end of number" if kind is None else repr(tok)
        raise CircSyntaxError(f"unexpected {what}", self._at(pos), {"number", "pi", "(", "-"})


def parse_number(text, span=None):
    """Evaluate a ``pi``-expression such as ``"3*pi/4"``."""
    return _Expr(text, span or Span(1, 1, len(text) + 1)).value()


# -- parser --------------------------------------------------------------------

_WORD = re.compile(r"\S+")


def _words(line, lineno):
    return [(m.group(), Span(lineno, m.start() + 1, m.end() + 1)) for m in _WORD.finditer(line)]


def _int(word, span, what):
    if not re.fullmatch(r"\d+", word):
        raise CircSyntaxError(f"{what} must be a non-negative integer, got {word!r}", span,
                              {"integer"})
    if len(word) > 9:
        raise CircSemanticError(f"{what} {word[:12]}... is out of range", span)
    return int(word)


def _options(directive, words, line_span):
    """Split ``key=value`` words into a dict after the positional ones."""
    required, defaults = _OPTIONS.get(directive, (set(), {}))
    allowed = required | set(defaults)
    values, spans = dict(defaults), {}
    for word, span in words:
        key, eq, raw = word.partition("=")
        if not eq:
            raise CircSyntaxError(f"expected key=value, got {word!r}", span,
                                  {f"{k}=" for k in allowed})
        if key not in allowed:
            raise CircSyntaxError(f"unknown option {key!r} for {directive}", span,
                                  {f"{k}=" for k in allowed})
        if key in spans:
            raise CircSemanticError(f"option {key!r} given twice", span)
        vspan = Span(span.line, span.col + len(key) + 1, span.end_col)
        values[key] = parse_number(raw, vspan)
        spans[key] = vspan
    missing = required - set(spans)
    if missing:
        raise CircSyntaxError(f"{directive} needs {', '.join(sorted(missing))}=", line_span,
                              {f"{k}=" for k in missing})
    return values, spans


def _check_mode(mode, span, n):
    if mode >= n:
        raise CircSemanticError(f"mode {mode} out of range (modes {n})", span)
    return mode


def _positional(words):
    """Leading words without ``=``."""
    k = 0
    while k < len(words) and "=" not in words[k][0]:
        k += 1
    return words[:k], words[k:]


def _parse_line(word, span, rest, n_modes, line_span):
    if word == "modes":
        if len(rest) != 1:
            raise CircSyntaxError("modes takes one integer", line_span, {"integer"})
        n = _int(rest[0][0], rest[0][1], "mode count")
        if not 1 <= n <= MAX_MODES:
            raise CircSemanticError(f"mode count must lie in [1, {MAX_MODES}], got {n}", rest[0][1])
        return ModesDecl(n, line_span)
    pos, opts = _positional(rest)
    if word == "seed":
        if opts or len(pos) not in (2, 3):
            raise CircSyntaxError("seed takes: mode re [im]", line_span, {"mode", "re", "im"})
        mode = _check_mode(_int(pos[0][0], pos[0][1], "mode"), pos[0][1], n_modes)
        re_ = parse_number(pos[1][0], pos[1][1])
        im = parse_number(pos[2][0], pos[2][1]) if len(pos) == 3 else 0.0
        return SeedDecl(mode, re_, im, line_span)
    if word == "nlo":
        if len(pos) != 2:
            raise CircSyntaxError("nlo takes two modes", line_span, {"mode"})
        a, b = (_check_mode(_int(w, s, "mode"), s, n_modes) for w, s in pos)
        if a == b:
            raise CircSemanticError(f"nlo needs two distinct modes, got {a} twice", pos[1][1])
        vals, spans = _options("nlo", opts, line_span)
        if not vals["gain"] >= 1:
            raise CircSemanticError(f"gain must be >= 1, got {vals['gain']}", spans["gain"])
        return NloDecl(a, b, vals["gain"], vals["pump"], line_span)
    if word == "loss":
        if len(pos) != 1:
            raise CircSyntaxError("loss takes one mode", line_span, {"mode"})
        mode = _check_mode(_int(pos[0][0], pos[0][1], "mode"), pos[0][1], n_modes)
        vals, spans = _options("loss", opts, line_span)
        if not 0 <= vals["eta"] <= 1:
            raise CircSemanticError(f"eta must lie in [0, 1], got {vals['eta']}", spans["eta"])
        return LossDecl(mode, vals["eta"], line_span)
    if word == "phase":
        if len(pos) != 1:
            raise CircSyntaxError("phase takes one mode", line_span, {"mode"})
        mode = _check_mode(_int(pos[0][0], pos[0][1], "mode"), pos[0][1], n_modes)
        vals, _ = _options("phase", opts, line_span)
        return PhaseDecl(mode, vals["phi"], line_span)
    # detect
    if not pos:
        raise CircSyntaxError("detect needs a kind", line_span, set(DETECTOR_KINDS))
    kind, kspan = pos[0]
    if kind not in DETECTOR_KINDS:
        raise CircSyntaxError(f"unknown detector {kind!r}", kspan, set(DETECTOR_KINDS))
    modes = tuple(_check_mode(_int(w, s, "mode"), s, n_modes) for w, s in pos[1:])
    if len(modes) not in _DETECTOR_ARITY[kind]:
        want = " or ".join(str(k) for k in _DETECTOR_ARITY[kind])
        raise CircSemanticError(f"detect {kind} takes {want} mode(s), got {len(modes)}", line_span)
    if len(set(modes)) != len(modes):
        raise CircSemanticError(f"detector modes repeat: {modes}", line_span)
    vals, _ = _options("detect", opts, line_span)
    return DetectDecl(kind, modes, vals["theta_a"], vals["theta_b"], vals["lambda"], line_span)


def parse(text):
    """Parse ``.circ`` source.

    ``text`` may be ``str`` or ``bytes`` (decoded as UTF-8).  Every
    rejection is a :class:`CircError` with a span; no other exception
    escapes.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            line = bytes(text)[:exc.start].count(b"\n") + 1
            raise CircSyntaxError("input is not valid UTF-8", Span(line, 1, 2)) from None
    decls = []
    n_modes = None
    seen_detector = False
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].rstrip("\r")
        words = _words(line, lineno)
        if not words:
            continue
        word, span = words[0]
        line_span = Span(lineno, span.col, words[-1][1].end_col)
        if word not in _KEYWORDS:
            expected = {"modes"} if n_modes is None else set(_KEYWORDS) - {"modes"}
            raise CircSyntaxError(f"unknown keyword {word!r}", span, expected)
        if n_modes is None and word != "modes":
            raise CircSemanticError("the first declaration must be 'modes N'", span, {"modes"})
        if n_modes is not None and word == "modes":
            raise CircSemanticError("duplicate 'modes' declaration", span)
        if seen_detector and word != "detect":
            raise CircSemanticError("detectors must come last", span, {"detect"})
        decl = _parse_line(word, span, words[1:], n_modes, line_span)
        if isinstance(decl, ModesDecl):
            n_modes = decl.n
        seen_detector = seen_detector or isinstance(decl, DetectDecl)
        decls.append(decl)
    end = Span(max(1, text.count("\n") + 1), 1, 2)
    if n_modes is None:
        raise CircSemanticError("empty circuit: expected 'modes N'", end, {"modes"})
    if not seen_detector:
        raise CircSemanticError("no detector declared", end, {"detect"})
    return CircuitAst(tuple(decls))


# -- rendering and compiling ---------------------------------------------------

def _fmt(x):
    # repr round-trips floats exactly
    return repr(float(x))


def render(ast):
    """Canonical source text; ``parse(render(ast)) == ast``."""
    out = []
    for d in ast.declarations:
        if isinstance(d, ModesDecl):
            out.append(f"modes {d.n}")
        elif isinstance(d, SeedDecl):
            out.append(f"seed {d.mode} {_fmt(d.re)} {_fmt(d.im)}")
        elif isinstance(d, NloDecl):
            out.append(f"nlo {d.mode_a} {d.mode_b} gain={_fmt(d.gain)} pump={_fmt(d.pump)}")
        elif isinstance(d, LossDecl):
            out.append(f"loss {d.mode} eta={_fmt(d.eta)}")
        elif isinstance(d, PhaseDecl):
            out.append(f"phase {d.mode} phi={_fmt(d.phi)}")
        else:
            modes = " ".join(str(m) for m in d.modes)
            out.append(f"detect {d.kind} {modes} theta_a={_fmt(d.theta_a)} "
                       f"theta_b={_fmt(d.theta_b)} lambda={_fmt(d.lam)}")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class Pipeline:
    """Compiled circuit plus, when it matches a standard layout, its config."""

    circuit: Circuit
    observable: Observable
    config: object = None


def compile_ast(ast):
    """Build the :class:`~su11.circuit.Circuit` described by ``ast``.

    Exactly one detector is supported.  When the element list is one of the
    standard interferometer layouts the equivalent
    :class:`~su11.interferometer.InterferometerConfig` is recovered too;
    ``to_circuit(config)`` then reproduces the circuit exactly.
    """
    dets = ast.detectors
    if len(dets) != 1:
        raise CircSemanticError(f"exactly one detector is supported, got {len(dets)}",
                                dets[1].span if len(dets) > 1 else Span(1, 1, 2))
    els = []
    for d in ast.declarations:
        if isinstance(d, SeedDecl):
            els.append(Seed(d.mode, complex(d.re, d.im)))
        elif isinstance(d, NloDecl):
            els.append(NLO(d.mode_a, d.mode_b, d.gain, d.pump))
        elif isinstance(d, LossDecl):
            els.append(Loss(d.mode, d.eta))
        elif isinstance(d, PhaseDecl):
            els.append(Phase(d.mode, d.phi))
    det = dets[0]
    detector = Detector(DETECTOR_KINDS[det.kind], det.modes, det.theta_a, det.theta_b, det.lam)
    circuit = Circuit(ast.n_modes, els, detector)
    return Pipeline(circuit, detector.kind, recognize(circuit))


def compile_text(text):
    return compile_ast(parse(text))


def recognize(circuit):
    """The :class:`InterferometerConfig` whose circuit is ``circuit``, or None."""
    from .interferometer import IncompatibleObservable, InterferometerConfig, Topology, to_circuit

    if circuit.n_modes > 2:
        return None
    els = list(circuit.elements)
    kw = {}
    if els and isinstance(els[0], Seed):
        if els[0].mode != 0:
            return None
        kw["seed_alpha"] = els.pop(0).alpha
    if circuit.n_modes == 1:
        topology = Topology.MZ_HOMODYNE_REFERENCE
        names = (("eta_ai", 0),)
    else:
        if not els or not isinstance(els[0], NLO):
            return None
        nlo = els.pop(0)
        kw.update(g1=nlo.gain, pump_phase=nlo.pump_phase)
        names = (("eta_ai", 0), ("eta_bi", 1))
    for name, mode in names:
        if els and isinstance(els[0], Loss) and els[0].mode == mode:
            kw[name] = els.pop(0).eta
    if not els or not isinstance(els[0], Phase):
        return None
    kw["phi"] = els.pop(0).phi
    if circuit.n_modes == 2:
        if els and isinstance(els[0], NLO):
            kw["g2"] = els.pop(0).gain
            kind = circuit.detector.kind
            topology = (Topology.CONVENTIONAL_INTENSITY if kind.is_intensity
                        else Topology.CONVENTIONAL_HOMODYNE)
        else:
            topology = Topology.TRUNCATED_HOMODYNE
        names = (("eta_ae", 0), ("eta_be", 1))
    else:
        names = (("eta_ae", 0),)
    for name, mode in names:
        if els and isinstance(els[0], Loss) and els[0].mode == mode:
            kw[name] = els.pop(0).eta
    if els:
        return None
    det = circuit.detector
    try:
        cfg = InterferometerConfig(topology, theta_a=det.theta_a, theta_b=det.theta_b,
                                   lambda_weight=det.lam, **kw)
        candidate = to_circuit(cfg, det.kind)
    except (IncompatibleObservable, DomainError):
        return None
    if candidate.elements != circuit.elements or candidate.detector != circuit.detector:
        return None
    return cfg


def config_to_ast(config, observable):
    """AST of the circuit of ``config`` measured with ``observable``."""
    from .interferometer import to_circuit

    circ = to_circuit(config, observable)
    decls = [ModesDecl(circ.n_modes)]
    for el in circ.elements:
        if isinstance(el, Seed):
            decls.append(SeedDecl(el.mode, complex(el.alpha).real, complex(el.alpha).imag))
        elif isinstance(el, NLO):
            decls.append(NloDecl(el.mode_a, el.mode_b, el.gain, el.pump_phase))
        elif isinstance(el, Loss):
            decls.append(LossDecl(el.mode, el.eta))
        else:
            decls.append(PhaseDecl(el.mode, el.phi))
    det = circ.detector
    decls.append(DetectDecl(_KIND_NAMES[det.kind], det.modes, det.theta_a, det.theta_b, det.lam))
    return CircuitAst(tuple(decls))
