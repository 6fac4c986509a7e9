#pragma once

// TSPLIB reader (EUC_2D instances and .opt.tour files) and tour evaluation.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <fmt/format.h>

#include "kmm/errors.hpp"

namespace kmm::tsp {

using City = std::uint32_t;
using Length = std::int64_t;

struct Point {
  double x;
  double y;
  bool operator==(const Point&) const = default;
};

/// City order of a closed tour, 0-based.
struct Tour {
  std::vector<City> order;

  std::size_t size() const noexcept { return order.size(); }
  bool operator==(const Tour&) const = default;
};

/// TSPLIB nint(sqrt(dx^2 + dy^2)); std::lround rounds halves away from zero.
inline Length euc2d_distance(Point a, Point b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return static_cast<Length>(std::lround(std::sqrt(dx * dx + dy * dy)));
}

/// Parsed EUC_2D instance with a precomputed distance matrix. Immutable.
class TspInstance {
 public:
  TspInstance(std::string name, std::vector<Point> coords)
      : name_(std::move(name)), coords_(std::move(coords)) {
    if (coords_.size() < 3) throw DomainError("an instance needs at least 3 cities");
    const std::size_t n = coords_.size();
    matrix_.resize(n * n);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) matrix_[a * n + b] = euc2d_distance(coords_[a], coords_[b]);
    }
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t dimension() const noexcept { return coords_.size(); }
  std::span<const Point> coords() const noexcept { return coords_; }

  Length distance(City a, City b) const noexcept { return matrix_[a * coords_.size() + b]; }

  bool operator==(const TspInstance& other) const {
    return name_ == other.name_ && coords_ == other.coords_;
  }

 private:
  std::string name_;
  std::vector<Point> coords_;
  std::vector<Length> matrix_;
};

inline bool is_permutation_of(std::span<const City> order, std::size_t dimension) {
  if (order.size() != dimension) return false;
  std::vector<bool> seen(dimension, false);
  for (City c : order) {
    if (c >= dimension || seen[c]) return false;
    seen[c] = true;
  }
  return true;
}

/// Closed-tour length; no validation, for hot loops over known-valid tours.
inline Length tour_length_unchecked(const TspInstance& instance, std::span<const City> order) {
  Length total = 0;
  for (std::size_t p = 0; p + 1 < order.size(); ++p) total += instance.distance(order[p], order[p + 1]);
  return total + instance.distance(order.back(), order.front());
}

inline Length tour_length(const TspInstance& instance, const Tour& tour) {
  if (!is_permutation_of(tour.order, instance.dimension())) {
    throw DomainError(fmt::format("tour is not a permutation of 0..{}", instance.dimension() - 1));
  }
  return tour_length_unchecked(instance, tour.order);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// Splits "KEY : VALUE" / "KEY: VALUE" / "KEY" into upper-cased key and value.
inline std::pair<std::string, std::string> split_keyword(std::string_view line) {
  const auto colon = line.find(':');
  if (colon == std::string_view::npos) return {upper(trim(line)), {}};
  return {upper(trim(line.substr(0, colon))), std::string(trim(line.substr(colon + 1)))};
}

template <class T>
T parse_number(std::string_view token, std::size_t line, const char* what) {
  T value{};
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (token.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError(fmt::format("malformed {} '{}'", what, token), line);
  }
  return value;
}

inline std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    pos = line.find_first_not_of(" \t\r", pos);
    if (pos == std::string_view::npos) break;
    const auto end = line.find_first_of(" \t\r", pos);
    out.push_back(line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end;
  }
  return out;
}

}  // namespace detail

/// Reads a TSPLIB EUC_2D document. Node ids in the file are 1-based.
inline TspInstance parse_instance(std::istream& in) {
  std::string name;
  std::optional<std::size_t> dimension;
  std::optional<std::string> edge_weight_type;
  std::vector<std::optional<Point>> coords;
  std::size_t coord_lines = 0;
  bool in_coords = false;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;

    if (in_coords) {
      const auto tok = detail::tokens(line);
      if (detail::upper(tok[0]) == "EOF") break;
      // A keyword line ends the section (e.g. DISPLAY_DATA_SECTION).
      if (std::isalpha(static_cast<unsigned char>(tok[0][0]))) {
        in_coords = false;
      } else {
        if (tok.size() != 3) {
          throw ParseError(fmt::format("expected 'id x y', got '{}'", line), line_no);
        }
        const auto id = detail::parse_number<long long>(tok[0], line_no, "node id");
        const auto x = detail::parse_number<double>(tok[1], line_no, "coordinate");
        const auto y = detail::parse_number<double>(tok[2], line_no, "coordinate");
        if (id < 1 || static_cast<std::size_t>(id) > coords.size()) {
          throw ParseError(fmt::format("node id {} outside 1..{}", id, coords.size()), line_no);
        }
        auto& slot = coords[static_cast<std::size_t>(id - 1)];
        if (slot) throw ParseError(fmt::format("duplicate node id {}", id), line_no);
        slot = Point{x, y};
        ++coord_lines;
        continue;
      }
    }

    const auto [key, value] = detail::split_keyword(line);
    if (key == "EOF") break;
    if (key == "NAME") {
      name = value;
    } else if (key == "DIMENSION") {
      const auto d = detail::parse_number<long long>(value, line_no, "dimension");
      if (d < 3) throw ParseError(fmt::format("dimension must be >= 3, got {}", d), line_no);
      dimension = static_cast<std::size_t>(d);
    } else if (key == "EDGE_WEIGHT_TYPE") {
      if (detail::upper(value) != "EUC_2D") {
        throw UnsupportedFormat(fmt::format("EDGE_WEIGHT_TYPE {} is not supported (only EUC_2D)", value));
      }
      edge_weight_type = value;
    } else if (key == "NODE_COORD_SECTION") {
      if (!dimension) throw ParseError("NODE_COORD_SECTION before DIMENSION", line_no);
      if (!edge_weight_type) throw ParseError("NODE_COORD_SECTION before EDGE_WEIGHT_TYPE", line_no);
      coords.assign(*dimension, std::nullopt);
      in_coords = true;
    } else if (key == "TYPE" || key == "COMMENT" || key == "DISPLAY_DATA_TYPE" ||
               key == "NODE_COORD_TYPE") {
      // informational
    } else if (key.ends_with("_SECTION")) {
      throw UnsupportedFormat(fmt::format("section {} is not supported", key));
    }
  }

  if (!dimension) throw ParseError("missing DIMENSION", 0);
  if (!edge_weight_type) throw ParseError("missing EDGE_WEIGHT_TYPE", 0);
  if (coords.empty()) throw ParseError("missing NODE_COORD_SECTION", 0);
  if (coord_lines != *dimension) {
    throw ParseError(
        fmt::format("DIMENSION is {} but {} coordinates were given", *dimension, coord_lines), 0);
  }
  std::vector<Point> points;
  points.reserve(coords.size());
  for (const auto& c : coords) points.push_back(*c);
  return TspInstance(std::move(name), std::move(points));
}

inline TspInstance parse_instance(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_instance(in);
}

inline TspInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance file " + path);
  return parse_instance(in);
}

/// Reads a TSPLIB tour file (TOUR_SECTION, -1 terminator); returns 0-based order.
inline Tour parse_tour(std::istream& in) {
  Tour tour;
  bool in_section = false;
  std::optional<std::size_t> dimension;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (!in_section) {
      const auto [key, value] = detail::split_keyword(line);
      if (key == "EOF") break;
      if (key == "DIMENSION") {
        dimension = static_cast<std::size_t>(detail::parse_number<long long>(value, line_no, "dimension"));
      } else if (key == "TOUR_SECTION") {
        in_section = true;
      }
      continue;
    }
    bool done = false;
    for (auto tok : detail::tokens(line)) {
      if (detail::upper(tok) == "EOF") {
        done = true;
        break;
      }
      const auto id = detail::parse_number<long long>(tok, line_no, "tour node");
      if (id == -1) {
        done = true;
        break;
      }
      if (id < 1) throw ParseError(fmt::format("invalid tour node {}", id), line_no);
      tour.order.push_back(static_cast<City>(id - 1));
    }
    if (done) break;
  }
  if (!in_section) throw ParseError("missing TOUR_SECTION", 0);
  if (dimension && *dimension != tour.order.size()) {
    throw ParseError(fmt::format("DIMENSION is {} but tour has {} nodes", *dimension, tour.order.size()), 0);
  }
  return tour;
}

inline Tour load_tour(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tour file " + path);
  return parse_tour(in);
}

/// Writes the instance back out as an EUC_2D document that parse_instance accepts.
inline void write_instance(std::ostream& out, const TspInstance& instance) {
  out << "NAME : " << instance.name() << "\n"
      << "TYPE : TSP\n"
      << "DIMENSION : " << instance.dimension() << "\n"
      << "EDGE_WEIGHT_TYPE : EUC_2D\n"
      << "NODE_COORD_SECTION\n";
  std::size_t id = 1;
  for (const Point& p : instance.coords()) out << fmt::format("{} {} {}\n", id++, p.x, p.y);
  out << "EOF\n";
}

}  // namespace kmm::tsp
