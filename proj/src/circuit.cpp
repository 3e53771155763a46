#include "cvsim/circuit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <limits>
#include <set>

#include "cvsim/conventions.hpp"
#include "cvsim/error.hpp"

namespace cvsim {

double Affine::evaluate(const OutcomeTable& outcomes) const {
  double value = offset;
  for (const AffineTerm& t : terms) {
    const auto it = outcomes.find(t.label);
    if (it == outcomes.end() || t.component >= it->second.size()) {
      throw InvalidArgument(fmt::format("feedforward references missing outcome '{}'", t.label));
    }
    value += t.coeff * it->second(t.component);
  }
  return value;
}

const char* keyword(GateKind kind) {
  switch (kind) {
    case GateKind::phase_shift: return "ps";
    case GateKind::beamsplitter: return "bs";
    case GateKind::squeeze: return "sq";
    case GateKind::two_mode_squeeze: return "tms";
    case GateKind::displace: return "disp";
  }
  return "?";
}

const char* keyword(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::loss: return "loss";
    case ChannelKind::amplifier: return "amp";
    case ChannelKind::noise: return "noise";
    case ChannelKind::phase_sensitive_amp: return "psa";
  }
  return "?";
}

const char* keyword(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::homodyne: return "homodyne";
    case MeasureKind::heterodyne: return "heterodyne";
    case MeasureKind::vacproj: return "vacproj";
  }
  return "?";
}

const char* keyword(NonGaussianKind kind) {
  switch (kind) {
    case NonGaussianKind::kerr: return "kerr";
    case NonGaussianKind::photon_count: return "photoncount";
    case NonGaussianKind::absorption: return "vacproj";
  }
  return "?";
}

const char* keyword(InitKind kind) {
  switch (kind) {
    case InitKind::vacuum: return "vacuum";
    case InitKind::coherent: return "coherent";
    case InitKind::squeezed: return "squeezed";
    case InitKind::fock: return "fock";
  }
  return "?";
}

const char* keyword(OutputKind kind) {
  switch (kind) {
    case OutputKind::moments: return "moments";
    case OutputKind::samples: return "samples";
    case OutputKind::probabilities: return "probabilities";
  }
  return "?";
}

const std::vector<std::string>& param_names(GateKind kind) {
  static const std::vector<std::string> ps{"theta"}, bs{"theta", "phi"}, sq{"r", "phi"},
      tms{"r"}, disp{"dx", "dp"};
  switch (kind) {
    case GateKind::phase_shift: return ps;
    case GateKind::beamsplitter: return bs;
    case GateKind::squeeze: return sq;
    case GateKind::two_mode_squeeze: return tms;
    case GateKind::displace: return disp;
  }
  return ps;
}

const std::vector<std::string>& param_names(ChannelKind kind) {
  static const std::vector<std::string> loss{"eta"}, amp{"gain"}, noise{"yxx", "yxp", "ypp"},
      psa{"g", "noise"};
  switch (kind) {
    case ChannelKind::loss: return loss;
    case ChannelKind::amplifier: return amp;
    case ChannelKind::noise: return noise;
    case ChannelKind::phase_sensitive_amp: return psa;
  }
  return loss;
}

int arity(GateKind kind) {
  return kind == GateKind::beamsplitter || kind == GateKind::two_mode_squeeze ? 2 : 1;
}

std::optional<std::string> defined_label(const NodeBody& body) {
  if (const auto* m = std::get_if<MeasureNode>(&body)) return m->label;
  if (const auto* n = std::get_if<NonGaussianNode>(&body)) {
    if (n->kind != NonGaussianKind::kerr) return n->label;
  }
  return std::nullopt;
}

const std::vector<int>& node_modes(const NodeBody& body) {
  return std::visit(
      [](const auto& n) -> const std::vector<int>& {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, FeedforwardNode>) {
          return std::visit([](const auto& t) -> const std::vector<int>& { return t.modes; },
                            n.target);
        } else {
          return n.modes;
        }
      },
      body);
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok { ident, number, equals, plus, minus, star, slash, lparen, rparen, dot, end };

const char* describe(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::number: return "number";
    case Tok::equals: return "'='";
    case Tok::plus: return "'+'";
    case Tok::minus: return "'-'";
    case Tok::star: return "'*'";
    case Tok::slash: return "'/'";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::dot: return "'.'";
    case Tok::end: return "end of line";
  }
  return "?";
}

struct Token {
  Tok kind = Tok::end;
  std::string text;
  int column = 0;
  double number = 0.0;
  bool integral = false;
};

[[noreturn]] void syntax(int line, int column, const std::string& message,
                         std::vector<std::string> expected = {}) {
  throw ParseError(ErrorKind::syntax, line, column, message, std::move(expected));
}

[[noreturn]] void semantic(int line, int column, const std::string& message) {
  throw ParseError(ErrorKind::semantic, line, column, message);
}

std::vector<Token> tokenize(std::string_view text, int line) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto is_ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  while (i < text.size()) {
    const char c = text[i];
    const int col = static_cast<int>(i) + 1;
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    Token t;
    t.column = col;
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < text.size() && is_ident(text[j])) ++j;
      t.kind = Tok::ident;
      t.text = std::string(text.substr(i, j - i));
      i = j;
    } else if (is_digit(c) || (c == '.' && i + 1 < text.size() && is_digit(text[i + 1]))) {
      std::size_t j = i;
      bool integral = true;
      while (j < text.size() && is_digit(text[j])) ++j;
      if (j < text.size() && text[j] == '.') {
        integral = false;
        ++j;
        while (j < text.size() && is_digit(text[j])) ++j;
      }
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < text.size() && is_digit(text[k])) {
          integral = false;
          while (k < text.size() && is_digit(text[k])) ++k;
          j = k;
        } else {
          syntax(line, static_cast<int>(k) + 1, "malformed exponent", {"digit"});
        }
      }
      t.kind = Tok::number;
      t.text = std::string(text.substr(i, j - i));
      t.integral = integral;
      const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (res.ec != std::errc() || !std::isfinite(t.number)) {
        syntax(line, col, fmt::format("number '{}' out of range", t.text));
      }
      i = j;
    } else {
      switch (c) {
        case '=': t.kind = Tok::equals; break;
        case '+': t.kind = Tok::plus; break;
        case '-': t.kind = Tok::minus; break;
        case '*': t.kind = Tok::star; break;
        case '/': t.kind = Tok::slash; break;
        case '(': t.kind = Tok::lparen; break;
        case ')': t.kind = Tok::rparen; break;
        case '.': t.kind = Tok::dot; break;
        default:
          syntax(line, col, fmt::format("unexpected character '{}'", c));
      }
      t.text = std::string(1, c);
      ++i;
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::end;
  end.column = static_cast<int>(text.size()) + 1;
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

struct LabelInfo {
  enum Kind { homodyne, heterodyne, vacproj, photon_count } kind;
};

class Parser {
 public:
  CircuitIR run(std::string_view source);

 private:
  void statement();
  void modes_statement();
  void init_statement();
  void output_statement();
  void gate_statement(GateKind kind);
  void channel_statement(ChannelKind kind);
  void kerr_statement();
  void measurement_statement();

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool accept(Tok kind) {
    if (peek().kind != kind) return false;
    ++pos_;
    return true;
  }
  const Token& expect(Tok kind, std::vector<std::string> expected = {}) {
    if (peek().kind != kind) {
      if (expected.empty()) expected.push_back(describe(kind));
      syntax(line_, peek().column, fmt::format("unexpected {}", describe_token(peek())),
             std::move(expected));
    }
    return next();
  }
  void expect_end() {
    if (peek().kind != Tok::end) {
      syntax(line_, peek().column, fmt::format("unexpected {}", describe_token(peek())),
             {"end of line"});
    }
  }
  static std::string describe_token(const Token& t) {
    if (t.kind == Tok::ident || t.kind == Tok::number) return fmt::format("'{}'", t.text);
    return describe(t.kind);
  }

  void require_modes(const Token& at) {
    if (!have_modes_) {
      semantic(line_, at.column, "'modes N' must come before any other statement");
    }
  }
  int mode_token();
  void check_live(int mode, int column);
  void check_distinct(const std::vector<int>& modes, int column);
  void mark_measured(const std::vector<int>& modes) {
    for (int m : modes) measured_[m] = true;
  }

  Affine expression();
  Affine term();
  Affine factor();
  double constant(const std::string& what);
  std::vector<Affine> key_values(const std::vector<std::string>& names,
                                 const std::vector<std::string>& optional, bool allow_refs,
                                 std::vector<int>* columns);

  CircuitIR ir_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int line_ = 0;
  bool have_modes_ = false;
  bool have_nodes_ = false;
  std::vector<bool> measured_;
  std::vector<bool> initialised_;
  std::map<std::string, LabelInfo, std::less<>> labels_;
};

int Parser::mode_token() {
  const Token& t = peek();
  int mode = -1;
  if (t.kind == Tok::number && t.integral) {
    mode = static_cast<int>(std::min(t.number, 1e9));
  } else if (t.kind == Tok::ident && t.text.size() > 1 && t.text[0] == 'q' &&
             std::all_of(t.text.begin() + 1, t.text.end(),
                         [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    const auto res = std::from_chars(t.text.data() + 1, t.text.data() + t.text.size(), mode);
    if (res.ec != std::errc()) mode = 1 << 30;
  } else {
    syntax(line_, t.column, fmt::format("unexpected {}", describe_token(t)), {"mode"});
  }
  next();
  if (mode < 0 || mode >= ir_.n_modes) {
    semantic(line_, t.column,
             fmt::format("unknown mode {} (circuit has {} modes)", t.text, ir_.n_modes));
  }
  return mode;
}

void Parser::check_live(int mode, int column) {
  if (measured_[mode]) semantic(line_, column, fmt::format("mode {} was already measured", mode));
}

void Parser::check_distinct(const std::vector<int>& modes, int column) {
  std::set<int> seen;
  for (int m : modes) {
    if (!seen.insert(m).second) semantic(line_, column, fmt::format("mode {} repeated", m));
  }
}

Affine Parser::expression() {
  Affine value = term();
  while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
    const bool minus = next().kind == Tok::minus;
    Affine rhs = term();
    const double sign = minus ? -1.0 : 1.0;
    value.offset += sign * rhs.offset;
    for (AffineTerm& t : rhs.terms) {
      t.coeff *= sign;
      value.terms.push_back(std::move(t));
    }
  }
  return value;
}

Affine Parser::term() {
  Affine value = factor();
  while (peek().kind == Tok::star || peek().kind == Tok::slash) {
    const Token op = next();
    Affine rhs = factor();
    if (op.kind == Tok::star) {
      if (!value.is_constant() && !rhs.is_constant()) {
        syntax(line_, op.column, "non-affine feedforward: product of measurement outcomes");
      }
      const Affine& scalar = value.is_constant() ? value : rhs;
      Affine other = value.is_constant() ? rhs : value;
      const double k = scalar.offset;
      other.offset *= k;
      for (AffineTerm& t : other.terms) t.coeff *= k;
      value = std::move(other);
    } else {
      if (!rhs.is_constant()) {
        syntax(line_, op.column, "non-affine feedforward: division by a measurement outcome");
      }
      if (rhs.offset == 0.0) semantic(line_, op.column, "division by zero");
      value.offset /= rhs.offset;
      for (AffineTerm& t : value.terms) t.coeff /= rhs.offset;
    }
  }
  return value;
}

Affine Parser::factor() {
  const Token& t = peek();
  static const std::vector<std::string> kExpected{"number", "label", "'pi'", "'('", "'-'"};
  switch (t.kind) {
    case Tok::plus:
      next();
      return factor();
    case Tok::minus: {
      next();
      Affine v = factor();
      v.offset = -v.offset;
      for (AffineTerm& term : v.terms) term.coeff = -term.coeff;
      return v;
    }
    case Tok::number:
      next();
      return Affine(t.number);
    case Tok::lparen: {
      next();
      Affine v = expression();
      expect(Tok::rparen);
      return v;
    }
    case Tok::ident: {
      const Token name = next();
      if (name.text == "pi") return Affine(std::numbers::pi);
      int component = 0;
      if (accept(Tok::dot)) {
        const Token& comp = expect(Tok::ident, {"'x'", "'p'"});
        if (comp.text == "x") {
          component = 0;
        } else if (comp.text == "p") {
          component = 1;
        } else {
          syntax(line_, comp.column, fmt::format("unknown outcome component '{}'", comp.text),
                 {"'x'", "'p'"});
        }
      }
      const auto it = labels_.find(name.text);
      if (it == labels_.end()) {
        semantic(line_, name.column,
                 fmt::format("label '{}' is not defined before this line", name.text));
      }
      if (it->second.kind == LabelInfo::vacproj) {
        semantic(line_, name.column,
                 fmt::format("label '{}' is a detection branch, not a numeric outcome", name.text));
      }
      if (component == 1 && it->second.kind != LabelInfo::heterodyne) {
        semantic(line_, name.column,
                 fmt::format("label '{}' has no p component", name.text));
      }
      Affine v;
      v.terms.push_back({name.text, component, 1.0});
      return v;
    }
    default:
      syntax(line_, t.column, fmt::format("unexpected {}", describe_token(t)), kExpected);
  }
}

double Parser::constant(const std::string& what) {
  const int column = peek().column;
  const Affine v = expression();
  if (!v.is_constant()) {
    semantic(line_, column, fmt::format("{} must be a constant", what));
  }
  return v.offset;
}

namespace {

// Merge repeated references and drop zero coefficients.
Affine normalise(Affine v) {
  std::vector<AffineTerm> merged;
  for (AffineTerm& t : v.terms) {
    auto it = std::find_if(merged.begin(), merged.end(), [&](const AffineTerm& m) {
      return m.label == t.label && m.component == t.component;
    });
    if (it == merged.end()) {
      merged.push_back(std::move(t));
    } else {
      it->coeff += t.coeff;
    }
  }
  std::erase_if(merged, [](const AffineTerm& t) { return t.coeff == 0.0; });
  v.terms = std::move(merged);
  return v;
}

}  // namespace

std::vector<Affine> Parser::key_values(const std::vector<std::string>& names,
                                       const std::vector<std::string>& optional,
                                       bool allow_refs, std::vector<int>* columns) {
  std::vector<std::optional<Affine>> values(names.size() + optional.size());
  std::vector<int> cols(values.size(), 0);
  std::vector<std::string> all = names;
  all.insert(all.end(), optional.begin(), optional.end());
  while (peek().kind != Tok::end) {
    const Token& key = expect(Tok::ident, [&] {
      std::vector<std::string> e;
      for (const auto& n : all) e.push_back(n + "=");
      return e;
    }());
    const auto it = std::find(all.begin(), all.end(), key.text);
    if (it == all.end()) {
      std::vector<std::string> e;
      for (const auto& n : all) e.push_back(n + "=");
      syntax(line_, key.column, fmt::format("unknown parameter '{}'", key.text), e);
    }
    const auto k = static_cast<std::size_t>(it - all.begin());
    if (values[k]) semantic(line_, key.column, fmt::format("parameter '{}' given twice", key.text));
    expect(Tok::equals);
    cols[k] = peek().column;
    Affine v = normalise(expression());
    if (!allow_refs && !v.is_constant()) {
      semantic(line_, cols[k], fmt::format("parameter '{}' must be a constant", key.text));
    }
    values[k] = std::move(v);
  }
  std::vector<Affine> out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!values[k]) {
      if (k < names.size()) {
        syntax(line_, peek().column, fmt::format("missing parameter '{}'", all[k]),
               {all[k] + "="});
      }
      out.emplace_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      out.push_back(std::move(*values[k]));
    }
  }
  if (columns) *columns = cols;
  return out;
}

CircuitIR Parser::run(std::string_view source) {
  std::size_t start = 0;
  line_ = 0;
  while (start <= source.size()) {
    std::size_t stop = source.find('\n', start);
    if (stop == std::string_view::npos) stop = source.size();
    std::string_view text = source.substr(start, stop - start);
    ++line_;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    toks_ = tokenize(text, line_);
    pos_ = 0;
    if (peek().kind != Tok::end) statement();
    start = stop + 1;
  }
  if (!have_modes_) syntax(1, 1, "missing 'modes N' declaration", {"modes"});
  return std::move(ir_);
}

void Parser::statement() {
  const Token& first = peek();
  if (first.kind != Tok::ident) {
    syntax(line_, first.column, fmt::format("unexpected {}", describe_token(first)),
           {"statement keyword", "label"});
  }
  if (peek(1).kind == Tok::equals) {
    require_modes(first);
    measurement_statement();
    return;
  }
  const std::string& kw = first.text;
  if (kw == "modes") return modes_statement();
  require_modes(first);
  if (kw == "init") return init_statement();
  if (kw == "output") return output_statement();
  if (kw == "kerr") return kerr_statement();
  for (GateKind g : {GateKind::phase_shift, GateKind::beamsplitter, GateKind::squeeze,
                     GateKind::two_mode_squeeze, GateKind::displace}) {
    if (kw == keyword(g)) return gate_statement(g);
  }
  for (ChannelKind c : {ChannelKind::loss, ChannelKind::amplifier, ChannelKind::noise,
                        ChannelKind::phase_sensitive_amp}) {
    if (kw == keyword(c)) return channel_statement(c);
  }
  syntax(line_, first.column, fmt::format("unknown statement '{}'", kw),
         {"modes", "init", "output", "ps", "bs", "sq", "tms", "disp", "loss", "amp", "noise",
          "psa", "kerr", "<label> ="});
}

void Parser::modes_statement() {
  const Token& kw = next();
  if (have_modes_) semantic(line_, kw.column, "'modes' declared twice");
  const Token& n = expect(Tok::number, {"mode count"});
  if (!n.integral || n.number < 1 || n.number > 1e7) {
    semantic(line_, n.column, fmt::format("mode count must be a positive integer, got {}", n.text));
  }
  expect_end();
  ir_.n_modes = static_cast<int>(n.number);
  ir_.initial_states.assign(static_cast<std::size_t>(ir_.n_modes), InitialState{});
  measured_.assign(static_cast<std::size_t>(ir_.n_modes), false);
  initialised_.assign(static_cast<std::size_t>(ir_.n_modes), false);
  have_modes_ = true;
}

void Parser::init_statement() {
  const Token& kw = next();
  if (have_nodes_) semantic(line_, kw.column, "'init' must come before the first operation");
  const int column = peek().column;
  const int mode = mode_token();
  if (initialised_[mode]) semantic(line_, column, fmt::format("mode {} initialised twice", mode));
  initialised_[mode] = true;
  const Token& kind = expect(Tok::ident, {"vacuum", "coherent", "squeezed", "fock"});
  InitialState s;
  if (kind.text == "vacuum") {
    s.kind = InitKind::vacuum;
  } else if (kind.text == "coherent") {
    s.kind = InitKind::coherent;
    s.a = constant("coherent dx");
    s.b = constant("coherent dp");
  } else if (kind.text == "squeezed") {
    s.kind = InitKind::squeezed;
    s.a = constant("squeezing r");
    s.b = constant("squeezing phi");
  } else if (kind.text == "fock") {
    s.kind = InitKind::fock;
    const Token& n = expect(Tok::number, {"photon number"});
    if (!n.integral || n.number > 1000) {
      semantic(line_, n.column, fmt::format("photon number must be a small integer, got {}", n.text));
    }
    s.n = static_cast<int>(n.number);
  } else {
    syntax(line_, kind.column, fmt::format("unknown initial state '{}'", kind.text),
           {"vacuum", "coherent", "squeezed", "fock"});
  }
  expect_end();
  ir_.initial_states[mode] = s;
}

void Parser::output_statement() {
  next();
  static const std::vector<std::string> kinds{"moments", "samples", "probabilities"};
  do {
    const Token& t = expect(Tok::ident, kinds);
    const auto it = std::find(kinds.begin(), kinds.end(), t.text);
    if (it == kinds.end()) {
      syntax(line_, t.column, fmt::format("unknown output '{}'", t.text), kinds);
    }
    const auto kind = static_cast<OutputKind>(it - kinds.begin());
    if (std::find(ir_.outputs.begin(), ir_.outputs.end(), kind) != ir_.outputs.end()) {
      semantic(line_, t.column, fmt::format("output '{}' requested twice", t.text));
    }
    ir_.outputs.push_back(kind);
  } while (peek().kind != Tok::end);
}

void Parser::gate_statement(GateKind kind) {
  next();
  have_nodes_ = true;
  GateNode g;
  g.kind = kind;
  const int column = peek().column;
  for (int i = 0; i < arity(kind); ++i) {
    const int c = peek().column;
    g.modes.push_back(mode_token());
    check_live(g.modes.back(), c);
  }
  check_distinct(g.modes, column);
  g.params = key_values(param_names(kind), {}, true, nullptr);
  const bool feedforward =
      std::any_of(g.params.begin(), g.params.end(), [](const Affine& a) { return !a.is_constant(); });
  Node node{feedforward ? NodeBody(FeedforwardNode{g}) : NodeBody(g), line_};
  ir_.nodes.push_back(std::move(node));
}

void Parser::channel_statement(ChannelKind kind) {
  next();
  have_nodes_ = true;
  ChannelNode c;
  c.kind = kind;
  const int mcol = peek().column;
  c.modes.push_back(mode_token());
  check_live(c.modes.back(), mcol);
  std::vector<int> cols;
  c.params = key_values(param_names(kind), {}, true, &cols);
  auto konst = [&](std::size_t i, double* out) {
    if (!c.params[i].is_constant()) return false;
    *out = c.params[i].offset;
    return true;
  };
  double v = 0.0;
  switch (kind) {
    case ChannelKind::loss:
      if (konst(0, &v) && !(v >= 0.0 && v <= 1.0)) {
        semantic(line_, cols[0], fmt::format("loss eta must lie in [0, 1], got {}", v));
      }
      break;
    case ChannelKind::amplifier:
      if (konst(0, &v) && !(v >= 1.0)) {
        semantic(line_, cols[0], fmt::format("amplifier gain must be >= 1, got {}", v));
      }
      break;
    case ChannelKind::phase_sensitive_amp:
      if (konst(0, &v) && !(v > 0.0)) {
        semantic(line_, cols[0], fmt::format("psa g must be positive, got {}", v));
      }
      if (konst(1, &v) && !(v >= 0.0)) {
        semantic(line_, cols[1], fmt::format("psa noise must be >= 0, got {}", v));
      }
      break;
    case ChannelKind::noise: {
      double xx = 0, xp = 0, pp = 0;
      if (konst(0, &xx) && konst(1, &xp) && konst(2, &pp)) {
        if (xx < 0.0 || pp < 0.0 || xx * pp - xp * xp < -conventions::psd_tol) {
          semantic(line_, cols[0], "noise covariance must be positive semidefinite");
        }
      }
      break;
    }
  }
  const bool feedforward =
      std::any_of(c.params.begin(), c.params.end(), [](const Affine& a) { return !a.is_constant(); });
  ir_.nodes.push_back({feedforward ? NodeBody(FeedforwardNode{c}) : NodeBody(c), line_});
}

void Parser::kerr_statement() {
  next();
  have_nodes_ = true;
  NonGaussianNode n;
  n.kind = NonGaussianKind::kerr;
  const int mcol = peek().column;
  n.modes.push_back(mode_token());
  check_live(n.modes.back(), mcol);
  n.chi = key_values({"chi"}, {}, false, nullptr)[0].offset;
  ir_.nodes.push_back({n, line_});
}

void Parser::measurement_statement() {
  const Token label = next();
  next();  // '='
  have_nodes_ = true;
  if (label.text == "pi") semantic(line_, label.column, "'pi' cannot be used as a label");
  if (labels_.count(label.text)) {
    semantic(line_, label.column, fmt::format("duplicate label '{}'", label.text));
  }
  const Token& kw = expect(Tok::ident, {"homodyne", "heterodyne", "vacproj", "photoncount"});
  std::vector<int> modes;
  auto read_mode = [&] {
    const int c = peek().column;
    modes.push_back(mode_token());
    check_live(modes.back(), c);
  };

  if (kw.text == "homodyne") {
    read_mode();
    std::vector<int> cols;
    const auto p = key_values({"angle"}, {"eff"}, false, &cols);
    MeasureNode m{label.text, MeasureKind::homodyne, modes, p[0].offset, 1.0};
    if (!std::isnan(p[1].offset)) {
      m.efficiency = p[1].offset;
      if (!(m.efficiency > 0.0 && m.efficiency <= 1.0)) {
        semantic(line_, cols[1], fmt::format("efficiency must lie in (0, 1], got {}", m.efficiency));
      }
    }
    labels_[label.text] = {LabelInfo::homodyne};
    ir_.nodes.push_back({m, line_});
  } else if (kw.text == "heterodyne") {
    read_mode();
    expect_end();
    labels_[label.text] = {LabelInfo::heterodyne};
    ir_.nodes.push_back({MeasureNode{label.text, MeasureKind::heterodyne, modes}, line_});
  } else if (kw.text == "photoncount") {
    read_mode();
    expect_end();
    labels_[label.text] = {LabelInfo::photon_count};
    ir_.nodes.push_back(
        {NonGaussianNode{NonGaussianKind::photon_count, modes, 0.0, label.text}, line_});
  } else if (kw.text == "vacproj") {
    const int column = peek().column;
    read_mode();
    while (peek().kind == Tok::number || (peek().kind == Tok::ident && peek(1).kind != Tok::equals)) {
      read_mode();
    }
    check_distinct(modes, column);
    bool absorption = false;
    if (peek().kind != Tok::end) {
      const Token& key = expect(Tok::ident, {"branch="});
      if (key.text != "branch") {
        syntax(line_, key.column, fmt::format("unknown parameter '{}'", key.text), {"branch="});
      }
      expect(Tok::equals);
      const Token& value = expect(Tok::ident, {"no_absorption", "absorption"});
      if (value.text == "absorption") {
        absorption = true;
      } else if (value.text != "no_absorption") {
        syntax(line_, value.column, fmt::format("unknown branch '{}'", value.text),
               {"no_absorption", "absorption"});
      }
      expect_end();
    }
    labels_[label.text] = {LabelInfo::vacproj};
    if (absorption) {
      ir_.nodes.push_back(
          {NonGaussianNode{NonGaussianKind::absorption, modes, 0.0, label.text}, line_});
    } else {
      ir_.nodes.push_back({MeasureNode{label.text, MeasureKind::vacproj, modes}, line_});
    }
  } else {
    syntax(line_, kw.column, fmt::format("unknown measurement '{}'", kw.text),
           {"homodyne", "heterodyne", "vacproj", "photoncount"});
  }
  mark_measured(modes);
}

// ---------------------------------------------------------------------------
// Printer

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string affine_text(const Affine& a) {
  if (a.is_constant()) return num(a.offset);
  std::string out = num(a.offset);
  for (const AffineTerm& t : a.terms) {
    out += fmt::format("+{}*{}{}", num(t.coeff), t.label, t.component == 1 ? ".p" : "");
  }
  return out;
}

std::string modes_text(const std::vector<int>& modes) {
  return fmt::format("{}", fmt::join(modes, " "));
}

template <class Kind>
std::string op_text(Kind kind, const std::vector<int>& modes, const std::vector<Affine>& params) {
  std::string out = fmt::format("{} {}", keyword(kind), modes_text(modes));
  const auto& names = param_names(kind);
  for (std::size_t i = 0; i < names.size(); ++i) {
    out += fmt::format(" {}={}", names[i], affine_text(params[i]));
  }
  return out;
}

}  // namespace

CircuitIR parse(std::string_view source) { return Parser().run(source); }

std::string print(const CircuitIR& ir) {
  std::string out = fmt::format("modes {}\n", ir.n_modes);
  for (int m = 0; m < ir.n_modes; ++m) {
    const InitialState& s = ir.initial_states[m];
    switch (s.kind) {
      case InitKind::vacuum: break;
      case InitKind::coherent:
      case InitKind::squeezed:
        out += fmt::format("init {} {} {} {}\n", m, keyword(s.kind), num(s.a), num(s.b));
        break;
      case InitKind::fock: out += fmt::format("init {} fock {}\n", m, s.n); break;
    }
  }
  if (!ir.outputs.empty()) {
    out += "output";
    for (OutputKind k : ir.outputs) out += fmt::format(" {}", keyword(k));
    out += "\n";
  }
  for (const Node& node : ir.nodes) {
    out += std::visit(
        [](const auto& n) -> std::string {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, GateNode> || std::is_same_v<T, ChannelNode>) {
            return op_text(n.kind, n.modes, n.params);
          } else if constexpr (std::is_same_v<T, FeedforwardNode>) {
            return std::visit([](const auto& t) { return op_text(t.kind, t.modes, t.params); },
                              n.target);
          } else if constexpr (std::is_same_v<T, MeasureNode>) {
            std::string s = fmt::format("{} = {} {}", n.label, keyword(n.kind), modes_text(n.modes));
            if (n.kind == MeasureKind::homodyne) {
              s += fmt::format(" angle={} eff={}", num(n.angle), num(n.efficiency));
            }
            return s;
          } else {
            switch (n.kind) {
              case NonGaussianKind::kerr:
                return fmt::format("kerr {} chi={}", modes_text(n.modes), num(n.chi));
              case NonGaussianKind::photon_count:
                return fmt::format("{} = photoncount {}", n.label, modes_text(n.modes));
              case NonGaussianKind::absorption:
                return fmt::format("{} = vacproj {} branch=absorption", n.label,
                                   modes_text(n.modes));
            }
            return std::string();
          }
        },
        node.body);
    out += "\n";
  }
  return out;
}

}  // namespace cvsim
