#include "evf/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "evf/error.hpp"

namespace evf {

namespace {

// --- config values --------------------------------------------------------------------

// Numbers keep their source text so unit scaling can shift the decimal exponent
// exactly instead of multiplying.
struct Number {
  std::string text;
};
using Value = std::variant<Number, std::string, bool, std::vector<Number>, std::vector<std::string>>;

constexpr int kOne = 0;
constexpr int kMm = -3;
constexpr int kGHz = 9;

struct Entry {
  Value value;
  int line = 0;
};

[[noreturn]] void parse_fail(int line, const std::string& what) {
  std::ostringstream os;
  if (line > 0) os << "line " << line << ": ";
  os << what;
  throw Error(ErrorCode::parse, os.str());
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool parse_number(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = t.data() + t.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

// Value of text * 10^e10, correctly rounded.
double scaled_number(const std::string& text, int e10) {
  std::string t = trim(text);
  int exp = 0;
  const auto epos = t.find_first_of("eE");
  if (epos != std::string::npos) {
    exp = std::stoi(t.substr(epos + 1));
    t = t.substr(0, epos);
  }
  double v = 0.0;
  parse_number(t + "e" + std::to_string(exp + e10), v);
  return v;
}

std::vector<std::string> split_items(const std::string& inner) {
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  for (char c : inner) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(trim(cur));
  return items;
}

bool unquote(const std::string& s, std::string& out) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    out = s.substr(1, s.size() - 2);
    return out.find('"') == std::string::npos;
  }
  return false;
}

Value parse_value(const std::string& raw, int line) {
  const std::string s = trim(raw);
  if (s.empty()) parse_fail(line, "missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  std::string str;
  if (unquote(s, str)) return str;
  if (s.front() == '[') {
    if (s.back() != ']') parse_fail(line, "unterminated array");
    const auto items = split_items(s.substr(1, s.size() - 2));
    if (!items.empty() && items.front().front() == '"') {
      std::vector<std::string> out;
      for (const auto& it : items) {
        if (!unquote(it, str)) parse_fail(line, "mixed or malformed string array");
        out.push_back(str);
      }
      return out;
    }
    std::vector<Number> out;
    for (const auto& it : items) {
      double v;
      if (!parse_number(it, v)) parse_fail(line, "malformed number '" + it + "' in array");
      out.push_back(Number{it});
    }
    return out;
  }
  double v;
  if (parse_number(s, v)) return Number{s};
  parse_fail(line, "cannot parse value '" + s + "'");
}

using Section = std::map<std::string, Entry>;
using Document = std::map<std::string, Section>;

Document parse_document(const std::string& text) {
  Document doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  bool any_section = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') parse_fail(line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (doc.count(section) && any_section) parse_fail(line, "duplicate section [" + section + "]");
      doc[section];
      any_section = true;
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) parse_fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) parse_fail(line, "empty key");
    auto& sec = doc[section];
    if (sec.count(key)) parse_fail(line, "duplicate key '" + key + "'");
    sec[key] = Entry{parse_value(s.substr(eq + 1), line), line};
  }
  return doc;
}

// Typed access with line context.
class Reader {
 public:
  Reader(const Section& sec, std::string name) : sec_(sec), name_(std::move(name)) {}

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, e] : sec_) {
      if (!ok.count(k)) parse_fail(e.line, "unknown key '" + k + "' in [" + name_ + "]");
    }
  }

  [[nodiscard]] bool has(const std::string& key) const { return sec_.count(key) > 0; }
  [[nodiscard]] int line(const std::string& key) const {
    return has(key) ? sec_.at(key).line : 0;
  }

  std::optional<double> number(const std::string& key, int e10 = kOne) const {
    if (!has(key)) return std::nullopt;
    const auto& e = sec_.at(key);
    if (const auto* d = std::get_if<Number>(&e.value)) return scaled_number(d->text, e10);
    parse_fail(e.line, key + " must be a number");
  }

  std::optional<int> integer(const std::string& key) const {
    const auto v = number(key);
    if (!v) return std::nullopt;
    if (*v != std::floor(*v) || std::abs(*v) > 1e9) parse_fail(line(key), key + " must be an integer");
    return static_cast<int>(*v);
  }

  std::optional<std::string> string(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const auto& e = sec_.at(key);
    if (const auto* s = std::get_if<std::string>(&e.value)) return *s;
    parse_fail(e.line, key + " must be a quoted string");
  }

  std::optional<std::vector<double>> numbers(const std::string& key, int e10 = kOne) const {
    if (!has(key)) return std::nullopt;
    const auto& e = sec_.at(key);
    if (const auto* v = std::get_if<std::vector<Number>>(&e.value)) {
      std::vector<double> out;
      for (const auto& n : *v) out.push_back(scaled_number(n.text, e10));
      return out;
    }
    parse_fail(e.line, key + " must be an array of numbers");
  }

  std::optional<std::vector<std::string>> strings(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const auto& e = sec_.at(key);
    if (const auto* v = std::get_if<std::vector<std::string>>(&e.value)) return *v;
    if (const auto* v = std::get_if<std::vector<Number>>(&e.value); v && v->empty()) return std::vector<std::string>{};
    parse_fail(e.line, key + " must be an array of strings");
  }

  void require(const std::string& key) const {
    if (!has(key)) parse_fail(0, "missing required key '" + key + "' in [" + name_ + "]");
  }

  void positive(const std::string& key, double v) const {
    if (!(v > 0.0)) parse_fail(line(key), key + " must be positive");
  }

 private:
  const Section& sec_;
  std::string name_;
};

// Shortest decimal text of v * 10^-e10 that scaled_number maps back to v.
std::string fmt_scaled(double v, int e10) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
  (void)ec;
  std::string sci(buf, end);
  std::string sign;
  if (sci.front() == '-') {
    sign = "-";
    sci.erase(0, 1);
  }
  const auto epos = sci.find('e');
  int exp = std::stoi(sci.substr(epos + 1)) - e10;
  std::string digits = sci.substr(0, epos);
  digits.erase(std::remove(digits.begin(), digits.end(), '.'), digits.end());
  if (v == 0.0) return "0";
  if (exp < -6 || exp > 15) {
    std::string m = digits.substr(0, 1);
    if (digits.size() > 1) m += "." + digits.substr(1);
    return sign + m + "e" + std::to_string(exp);
  }
  const int point = exp + 1;  // digits before the decimal point
  const int nd = static_cast<int>(digits.size());
  std::string out;
  if (point <= 0) {
    out = "0." + std::string(-point, '0') + digits;
  } else if (point >= nd) {
    out = digits + std::string(point - nd, '0');
  } else {
    out = digits.substr(0, point) + "." + digits.substr(point);
  }
  return sign + out;
}

std::string fmt_list(const std::vector<double>& v, int unit) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt_scaled(v[i], unit);
  }
  return s + "]";
}

}  // namespace

// --- config ----------------------------------------------------------------------

RunConfig parse_config(const std::string& text) {
  const Document doc = parse_document(text);
  static const std::set<std::string> known{"", "run", "spec", "geometry", "housing",
                                           "numerics", "curves", "output"};
  for (const auto& [name, sec] : doc) {
    if (!known.count(name)) {
      const int line = sec.empty() ? 0 : sec.begin()->second.line;
      parse_fail(line, "unknown section [" + name + "]");
    }
  }
  if (doc.count("") && !doc.at("").empty()) {
    const auto& e = doc.at("").begin()->second;
    parse_fail(e.line, "key '" + doc.at("").begin()->first + "' outside any section");
  }
  const Section empty;
  auto section = [&](const std::string& n) -> const Section& {
    return doc.count(n) ? doc.at(n) : empty;
  };

  RunConfig c;

  Reader run(section("run"), "run");
  run.allow({"command"});
  if (auto v = run.string("command")) c.subcommand = *v;

  if (!doc.count("spec")) parse_fail(0, "missing required section [spec]");
  Reader sp(section("spec"), "spec");
  sp.allow({"order", "return_loss", "center_frequency", "bandwidth", "topology"});
  for (const char* k : {"order", "return_loss", "center_frequency", "bandwidth", "topology"}) {
    sp.require(k);
  }
  c.spec.order = *sp.integer("order");
  if (c.spec.order < 1) parse_fail(sp.line("order"), "order must be >= 1");
  c.spec.return_loss = *sp.number("return_loss");
  sp.positive("return_loss", c.spec.return_loss);
  c.spec.center_frequency = *sp.number("center_frequency", kGHz);
  sp.positive("center_frequency", c.spec.center_frequency);
  c.spec.bandwidth = *sp.number("bandwidth", kGHz);
  sp.positive("bandwidth", c.spec.bandwidth);
  if (c.spec.bandwidth >= 2.0 * c.spec.center_frequency) {
    parse_fail(sp.line("bandwidth"), "bandwidth must be below twice the center frequency");
  }
  try {
    c.topology = topology_from_string(*sp.string("topology"));
  } catch (const Error& e) {
    parse_fail(sp.line("topology"), std::string("topology: ") + e.what());
  }

  if (doc.count("geometry")) {
    Reader g(section("geometry"), "geometry");
    FilterDesign d;
    d.topology = c.topology;
    auto common = [&](auto& p) {
      p.order = c.spec.order;
      if (auto v = g.number("a", kMm)) p.a = *v;
      if (auto v = g.number("a_ev", kMm)) p.a_ev = *v;
      if (auto v = g.number("l_port", kMm)) p.l_port = *v;
      if (auto v = g.number("rx", kMm)) p.rx = *v;
      if (auto v = g.number("eps_r")) p.material.eps_r = *v;
    };
    if (c.topology == Topology::airhole) {
      g.allow({"a", "a_ev", "l_port", "rx", "eps_r", "l_d", "l_step", "resonator_lengths", "hole_rz"});
      g.require("resonator_lengths");
      g.require("hole_rz");
      common(d.airhole);
      if (auto v = g.number("l_d", kMm)) d.airhole.l_d = *v;
      if (auto v = g.number("l_step", kMm)) d.airhole.l_step = *v;
      d.airhole.resonator_lengths = *g.numbers("resonator_lengths", kMm);
      d.airhole.hole_rz = *g.numbers("hole_rz", kMm);
    } else {
      g.allow({"a", "a_ev", "l_port", "rx", "eps_r", "l_s1", "gaps", "post_rz"});
      g.require("l_s1");
      g.require("gaps");
      g.require("post_rz");
      common(d.posts);
      d.posts.l_s1 = *g.number("l_s1", kMm);
      d.posts.gaps = *g.numbers("gaps", kMm);
      d.posts.post_rz = *g.numbers("post_rz", kMm);
    }
    try {
      d.validate();
    } catch (const Error& e) {
      parse_fail(0, std::string("[geometry] ") + e.what());
    }
    c.geometry = d;
  }

  if (doc.count("housing")) {
    Reader hs(section("housing"), "housing");
    hs.allow({"a", "a_ev", "l_ev", "l_port", "l_d"});
    Housing h;
    for (auto [key, field] : {std::pair{"a", &h.a}, {"a_ev", &h.a_ev}, {"l_ev", &h.l_ev},
                              {"l_port", &h.l_port}, {"l_d", &h.l_d}}) {
      if (auto v = hs.number(key, kMm)) {
        *field = *v;
        hs.positive(key, *field);
      }
    }
    c.housing = h;
  }

  Reader nu(section("numerics"), "numerics");
  nu.allow({"h", "eval_h", "mode_count", "threads", "f_start", "f_stop", "coarse_step",
            "fine_step", "tan_delta", "refine_budget"});
  auto& n = c.numerics;
  if (auto v = nu.number("h", kMm)) n.h = *v, nu.positive("h", n.h);
  if (auto v = nu.number("eval_h", kMm)) n.eval_h = *v, nu.positive("eval_h", n.eval_h);
  if (auto v = nu.integer("mode_count")) {
    n.mode_count = *v;
    if (n.mode_count < 1) parse_fail(nu.line("mode_count"), "mode_count must be >= 1");
  }
  if (auto v = nu.integer("threads")) {
    n.threads = *v;
    if (n.threads < 1) parse_fail(nu.line("threads"), "threads must be >= 1");
  }
  if (auto v = nu.number("f_start", kGHz)) n.f_start = *v, nu.positive("f_start", n.f_start);
  if (auto v = nu.number("f_stop", kGHz)) n.f_stop = *v;
  if (!(n.f_stop > n.f_start)) parse_fail(nu.line("f_stop"), "f_stop must exceed f_start");
  if (auto v = nu.number("coarse_step", kGHz)) n.coarse_step = *v, nu.positive("coarse_step", n.coarse_step);
  if (auto v = nu.number("fine_step", kGHz)) n.fine_step = *v, nu.positive("fine_step", n.fine_step);
  if (auto v = nu.number("tan_delta")) {
    n.tan_delta = *v;
    if (n.tan_delta < 0.0) parse_fail(nu.line("tan_delta"), "tan_delta must be >= 0");
  }
  if (auto v = nu.integer("refine_budget")) {
    n.refine_budget = *v;
    if (n.refine_budget < 1) parse_fail(nu.line("refine_budget"), "refine_budget must be >= 1");
  }

  Reader cu(section("curves"), "curves");
  cu.allow({"variables", "lo", "hi", "samples"});
  if (auto v = cu.strings("variables")) {
    for (const auto& name : *v) {
      CurveVariable var;
      try {
        var = curve_variable_from_string(name);
      } catch (const Error& e) {
        parse_fail(cu.line("variables"), std::string("variables: ") + e.what());
      }
      if (topology_of(var) != c.topology) {
        parse_fail(cu.line("variables"), "curve variable '" + name + "' does not belong to the " +
                                             to_string(c.topology) + " topology");
      }
      c.curves.variables.push_back(var);
    }
  }
  if (auto v = cu.number("lo", kMm)) c.curves.lo = *v;
  if (auto v = cu.number("hi", kMm)) c.curves.hi = *v;
  if (c.curves.lo && c.curves.hi && !(*c.curves.hi > *c.curves.lo)) {
    parse_fail(cu.line("hi"), "hi must exceed lo");
  }
  if (auto v = cu.integer("samples")) {
    if (*v < 4) parse_fail(cu.line("samples"), "samples must be >= 4");
    c.curves.samples = *v;
  }

  Reader out(section("output"), "output");
  out.allow({"directory"});
  if (auto v = out.string("directory")) c.output_dir = *v;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_geometry(const FilterDesign& d) {
  std::ostringstream os;
  os << "[geometry]\n";
  auto common = [&](const auto& p) {
    os << "a = " << fmt_scaled(p.a, kMm) << "\n"
       << "a_ev = " << fmt_scaled(p.a_ev, kMm) << "\n"
       << "l_port = " << fmt_scaled(p.l_port, kMm) << "\n"
       << "rx = " << fmt_scaled(p.rx, kMm) << "\n"
       << "eps_r = " << fmt_scaled(p.material.eps_r, kOne) << "\n";
  };
  if (d.topology == Topology::airhole) {
    common(d.airhole);
    os << "l_d = " << fmt_scaled(d.airhole.l_d, kMm) << "\n"
       << "l_step = " << fmt_scaled(d.airhole.l_step, kMm) << "\n"
       << "hole_rz = " << fmt_list(d.airhole.hole_rz, kMm) << "\n"
       << "resonator_lengths = " << fmt_list(d.airhole.resonator_lengths, kMm) << "\n";
  } else {
    common(d.posts);
    os << "l_s1 = " << fmt_scaled(d.posts.l_s1, kMm) << "\n"
       << "gaps = " << fmt_list(d.posts.gaps, kMm) << "\n"
       << "post_rz = " << fmt_list(d.posts.post_rz, kMm) << "\n";
  }
  return os.str();
}

std::string emit_config(const RunConfig& c) {
  std::ostringstream os;
  if (!c.subcommand.empty()) os << "[run]\ncommand = \"" << c.subcommand << "\"\n\n";
  os << "[spec]\n"
     << "order = " << c.spec.order << "\n"
     << "return_loss = " << fmt_scaled(c.spec.return_loss, kOne) << "  # dB\n"
     << "center_frequency = " << fmt_scaled(c.spec.center_frequency, kGHz) << "  # GHz\n"
     << "bandwidth = " << fmt_scaled(c.spec.bandwidth, kGHz) << "  # GHz\n"
     << "topology = \"" << to_string(c.topology) << "\"\n";
  if (c.geometry) os << "\n# lengths in mm\n" << emit_geometry(*c.geometry);
  if (c.housing) {
    const auto& h = *c.housing;
    os << "\n[housing]\n"
       << "a = " << fmt_scaled(h.a, kMm) << "\n"
       << "a_ev = " << fmt_scaled(h.a_ev, kMm) << "\n"
       << "l_ev = " << fmt_scaled(h.l_ev, kMm) << "\n"
       << "l_port = " << fmt_scaled(h.l_port, kMm) << "\n"
       << "l_d = " << fmt_scaled(h.l_d, kMm) << "\n";
  }
  const auto& n = c.numerics;
  os << "\n[numerics]\n"
     << "h = " << fmt_scaled(n.h, kMm) << "  # mm\n"
     << "eval_h = " << fmt_scaled(n.eval_h, kMm) << "  # mm\n"
     << "mode_count = " << n.mode_count << "\n"
     << "threads = " << n.threads << "\n"
     << "f_start = " << fmt_scaled(n.f_start, kGHz) << "  # GHz\n"
     << "f_stop = " << fmt_scaled(n.f_stop, kGHz) << "  # GHz\n"
     << "coarse_step = " << fmt_scaled(n.coarse_step, kGHz) << "  # GHz\n"
     << "fine_step = " << fmt_scaled(n.fine_step, kGHz) << "  # GHz\n"
     << "tan_delta = " << fmt_scaled(n.tan_delta, kOne) << "\n"
     << "refine_budget = " << n.refine_budget << "\n";
  if (!c.curves.variables.empty() || c.curves.lo || c.curves.hi || c.curves.samples) {
    os << "\n[curves]\n";
    if (!c.curves.variables.empty()) {
      os << "variables = [";
      for (std::size_t i = 0; i < c.curves.variables.size(); ++i) {
        os << (i ? ", " : "") << '"' << to_string(c.curves.variables[i]) << '"';
      }
      os << "]\n";
    }
    if (c.curves.lo) os << "lo = " << fmt_scaled(*c.curves.lo, kMm) << "\n";
    if (c.curves.hi) os << "hi = " << fmt_scaled(*c.curves.hi, kMm) << "\n";
    if (c.curves.samples) os << "samples = " << *c.curves.samples << "\n";
  }
  os << "\n[output]\ndirectory = \"" << c.output_dir << "\"\n";
  return os.str();
}

// --- files -------------------------------------------------------------------------

std::string as_comment(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) out += line.empty() ? "#\n" : "# " + line + "\n";
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

std::string format_touchstone(const SParamSet& s, const std::string& comment) {
  if (s.size() == 0) throw Error(ErrorCode::io, "refusing to write an empty S-parameter set");
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s.frequencies[i] > s.frequencies[i - 1])) {
      throw Error(ErrorCode::io, "Touchstone rows must be sorted by frequency");
    }
  }
  std::ostringstream os;
  std::istringstream in(comment);
  std::string line;
  while (std::getline(in, line)) os << "! " << line << "\n";
  os << "! grid h = " << s.h / mm << " mm, modes = " << s.mode_count << "\n";
  os << "# GHz S RI R 50\n";
  char buf[512];
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& m = s.s[i];
    std::snprintf(buf, sizeof buf,
                  "%.15g %.12g %.12g %.12g %.12g %.12g %.12g %.12g %.12g\n",
                  s.frequencies[i] / GHz, m.s11.real(), m.s11.imag(), m.s21.real(),
                  m.s21.imag(), m.s12.real(), m.s12.imag(), m.s22.real(), m.s22.imag());
    os << buf;
  }
  return os.str();
}

void write_touchstone(const SParamSet& s, const std::filesystem::path& path,
                      const std::string& comment) {
  write_text(path, format_touchstone(s, comment));
}

TouchstoneFile parse_touchstone(const std::string& text) {
  TouchstoneFile tf;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool have_options = false;
  double unit = GHz;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '!') {
      tf.comments.push_back(trim(s.substr(1)));
      continue;
    }
    if (const auto bang = s.find('!'); bang != std::string::npos) s = trim(s.substr(0, bang));
    if (s.front() == '#') {
      if (have_options) parse_fail(line, "second option line");
      std::istringstream os(s.substr(1));
      std::string tok;
      std::vector<std::string> toks;
      while (os >> tok) {
        std::transform(tok.begin(), tok.end(), tok.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
        toks.push_back(tok);
      }
      for (std::size_t i = 0; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (t == "HZ") unit = 1.0;
        else if (t == "KHZ") unit = 1e3;
        else if (t == "MHZ") unit = MHz;
        else if (t == "GHZ") unit = GHz;
        else if (t == "S" || t == "RI") continue;
        else if (t == "R" && i + 1 < toks.size()) {
          double r;
          if (!parse_number(toks[++i], r) || r != 50.0) parse_fail(line, "only R 50 is supported");
        } else {
          parse_fail(line, "unsupported Touchstone option '" + t + "'");
        }
      }
      have_options = true;
      continue;
    }
    if (!have_options) parse_fail(line, "data before the option line");
    std::istringstream ds(s);
    std::vector<double> v;
    std::string tok;
    while (ds >> tok) {
      double x;
      if (!parse_number(tok, x)) parse_fail(line, "malformed number '" + tok + "'");
      v.push_back(x);
    }
    if (v.size() != 9) parse_fail(line, "expected 9 columns for a 2-port row");
    const double f = v[0] * unit;
    if (!tf.data.frequencies.empty() && !(f > tf.data.frequencies.back())) {
      parse_fail(line, "frequencies must increase");
    }
    tf.data.frequencies.push_back(f);
    tf.data.s.push_back(SMatrix2{{v[1], v[2]}, {v[3], v[4]}, {v[5], v[6]}, {v[7], v[8]}});
  }
  if (!have_options) parse_fail(0, "missing option line");
  return tf;
}

TouchstoneFile read_touchstone(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_touchstone(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string format_csv(const DesignCurve& curve, const std::string& comment) {
  if (curve.size() == 0) throw Error(ErrorCode::io, "refusing to write an empty curve");
  const auto& c = curve.context;
  std::ostringstream os;
  os << as_comment(comment);
  os << "# variable = " << to_string(curve.variable) << "\n"
     << "# topology = " << to_string(topology_of(curve.variable)) << "\n"
     << "# a = " << c.a / mm << " mm\n"
     << "# a_ev = " << c.a_ev / mm << " mm\n"
     << "# l_port = " << c.port_length(topology_of(curve.variable)) / mm << " mm\n"
     << "# l_d = " << c.l_d / mm << " mm\n"
     << "# l_step = " << c.l_step / mm << " mm\n"
     << "# hole_r1 = " << c.hole_r1 / mm << " mm\n"
     << "# rx = " << c.rx / mm << " mm\n"
     << "# eps_r = " << c.material.eps_r << "\n"
     << "# tan_delta = " << c.material.tan_delta << "\n"
     << "# f_c = " << c.f_c / GHz << " GHz\n"
     << "# bandwidth = " << c.bandwidth / GHz << " GHz\n"
     << "# h = " << c.h / mm << " mm\n"
     << "# tail = " << c.tail / mm << " mm\n";
  os << curve.parameter_name() << "," << curve.value_name() << ",resonator_mm\n";
  char buf[128];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g\n", curve.parameter[i] / mm,
                  curve.value[i], curve.resonator[i] / mm);
    os << buf;
  }
  return os.str();
}

std::string format_report(const DesignReport& r, const FilterSpec& spec) {
  std::ostringstream os;
  char buf[160];
  auto row = [&](const char* key, double v, const char* unit) {
    std::snprintf(buf, sizeof buf, "%-22s %.6f %s\n", key, v, unit);
    os << buf;
  };
  os << "topology               " << to_string(r.design.topology) << "\n";
  row("target_fc", spec.center_frequency / GHz, "GHz");
  row("target_bw", spec.bandwidth / MHz, "MHz");
  row("center_frequency", r.center_frequency / GHz, "GHz");
  row("bandwidth", r.bandwidth / MHz, "MHz");
  row("f_lower", r.f_lower / GHz, "GHz");
  row("f_upper", r.f_upper / GHz, "GHz");
  os << "edges                  " << (r.edges_from_return_loss ? "return-loss" : "-3 dB S21")
     << "\n";
  row("min_return_loss", r.min_return_loss, "dB");
  row("min_insertion_loss", r.min_insertion_loss, "dB");
  row("tan_delta", r.tan_delta, "");
  if (r.spurious) {
    row("first_spurious", *r.spurious / GHz, "GHz");
    row("spurious_free_range", *r.sfr / GHz, "GHz");
  } else {
    os << "first_spurious         none in sweep\n";
  }
  row("l_ev", r.design.l_ev() / mm, "mm");
  row("l_tot", r.design.l_tot() / mm, "mm");
  os << "\n" << emit_geometry(r.design);
  return os.str();
}

std::string format_csv(const DesignReport& report, const std::string& comment) {
  const auto& s = report.response;
  if (s.size() == 0) throw Error(ErrorCode::io, "refusing to write an empty report");
  std::ostringstream os;
  os << as_comment(comment);
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "# center_frequency_ghz = %.9g\n# bandwidth_mhz = %.9g\n"
                "# f_lower_ghz = %.9g\n# f_upper_ghz = %.9g\n# min_return_loss_db = %.6g\n"
                "# min_insertion_loss_db = %.6g\n# tan_delta = %.6g\n",
                report.center_frequency / GHz, report.bandwidth / MHz, report.f_lower / GHz,
                report.f_upper / GHz, report.min_return_loss, report.min_insertion_loss,
                report.tan_delta);
  os << buf;
  if (report.spurious) {
    std::snprintf(buf, sizeof buf, "# first_spurious_ghz = %.9g\n# sfr_ghz = %.9g\n",
                  *report.spurious / GHz, *report.sfr / GHz);
    os << buf;
  }
  os << "f_ghz,s11_db,s21_db\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g,%.8g,%.8g\n", s.frequencies[i] / GHz,
                  to_db(std::abs(s.s[i].s11)), to_db(std::abs(s.s[i].s21)));
    os << buf;
  }
  return os.str();
}

void write_csv(const DesignCurve& curve, const std::filesystem::path& path,
               const std::string& comment) {
  write_text(path, format_csv(curve, comment));
}

void write_csv(const DesignReport& report, const std::filesystem::path& path,
               const std::string& comment) {
  write_text(path, format_csv(report, comment));
}

}  // namespace evf
