#include "qkdnet/topology.hpp"

#include <fstream>
#include <queue>
#include <sstream>

#include "qkdnet/bytes.hpp"
#include "qkdnet/config_text.hpp"
#include "qkdnet/error.hpp"

namespace qkdnet {

const char* to_string(NodeKind kind) noexcept {
  return kind == NodeKind::QbbNode ? "qbb" : "user";
}

const char* to_string(LinkClass cls) noexcept {
  switch (cls) {
    case LinkClass::QbbFiber: return "qbb";
    case LinkClass::QanFiber: return "qan_fiber";
    case LinkClass::QanFreeSpace: return "qan_freespace";
  }
  return "qbb";
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::ValidationError, what); }

void check_name(const std::string& name, const char* what) {
  if (name.empty()) invalid(std::string(what) + " name must be non-empty");
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == '=' || c == '#' || c == '[' || c == ']' || c == ',') {
      invalid(std::string(what) + " name '" + name + "' contains a reserved character");
    }
  }
}

NodeKind parse_kind(const std::string& s) {
  if (s == "qbb") return NodeKind::QbbNode;
  if (s == "user") return NodeKind::EndUser;
  throw Error(Errc::ParseError, "unknown node kind '" + s + "'");
}

LinkClass parse_class(const std::string& s) {
  if (s == "qbb") return LinkClass::QbbFiber;
  if (s == "qan_fiber") return LinkClass::QanFiber;
  if (s == "qan_freespace") return LinkClass::QanFreeSpace;
  throw Error(Errc::ParseError, "unknown link class '" + s + "'");
}

}  // namespace

void Topology::add_node(Node node) {
  check_name(node.name, "node");
  std::string key = node.name;
  if (!nodes_.emplace(key, std::move(node)).second) invalid("duplicate node '" + key + "'");
}

void Topology::add_profile(DeviceProfile profile) {
  check_name(profile.id, "profile");
  std::string key = profile.id;
  if (!profiles_.emplace(key, std::move(profile)).second) invalid("duplicate profile '" + key + "'");
}

void Topology::add_link(LinkSpec link) {
  check_name(link.id, "link");
  std::string key = link.id;
  if (!links_.emplace(key, std::move(link)).second) invalid("duplicate link id '" + key + "'");
}

const Node* Topology::find_node(std::string_view name) const {
  auto it = nodes_.find(std::string(name));
  return it == nodes_.end() ? nullptr : &it->second;
}

const LinkSpec* Topology::find_link(std::string_view id) const {
  auto it = links_.find(std::string(id));
  return it == links_.end() ? nullptr : &it->second;
}

const LinkSpec& Topology::link(std::string_view id) const {
  const LinkSpec* l = find_link(id);
  if (!l) throw Error(Errc::InvalidArgument, "unknown link '" + std::string(id) + "'");
  return *l;
}

const DeviceProfile& Topology::profile_of(const LinkSpec& link) const {
  auto it = profiles_.find(link.profile);
  if (it == profiles_.end()) invalid("link '" + link.id + "' references undefined profile '" + link.profile + "'");
  return it->second;
}

std::vector<const LinkSpec*> Topology::links_of(std::string_view node) const {
  std::vector<const LinkSpec*> out;
  for (const auto& [id, l] : links_) {
    if (l.touches(node)) out.push_back(&l);
  }
  return out;
}

const LinkSpec* Topology::access_link(std::string_view node) const {
  if (!is_end_user(node)) return nullptr;
  auto incident = links_of(node);
  return incident.size() == 1 ? incident.front() : nullptr;
}

bool Topology::is_end_user(std::string_view node) const {
  const Node* n = find_node(node);
  return n && n->kind == NodeKind::EndUser;
}

bool Topology::connected(const std::set<std::string>& removed_links) const {
  if (nodes_.empty()) return true;
  std::set<std::string> seen{nodes_.begin()->first};
  std::queue<std::string> frontier;
  frontier.push(nodes_.begin()->first);
  while (!frontier.empty()) {
    std::string at = frontier.front();
    frontier.pop();
    for (const LinkSpec* l : links_of(at)) {
      if (removed_links.count(l->id)) continue;
      const std::string& next = l->other(at);
      if (seen.insert(next).second) frontier.push(next);
    }
  }
  return seen.size() == nodes_.size();
}

std::size_t Topology::count_links(LinkClass cls) const {
  std::size_t n = 0;
  for (const auto& [id, l] : links_) n += l.link_class == cls ? 1 : 0;
  return n;
}

std::size_t Topology::count_qan_links() const {
  return count_links(LinkClass::QanFiber) + count_links(LinkClass::QanFreeSpace);
}

void Topology::validate() const {
  if (nodes_.empty()) invalid("topology has no nodes");

  for (const auto& [id, p] : profiles_) {
    if (!(p.r0_bps > 0.0)) invalid("profile '" + id + "': r0_bps must be > 0");
    if (p.alpha_db_per_km < 0.0) invalid("profile '" + id + "': alpha must be >= 0");
    if (p.max_length_km < 0.0) invalid("profile '" + id + "': max_km must be >= 0");
    if (p.restart_latency_s < 0.0) invalid("profile '" + id + "': restart_s must be >= 0");
  }

  std::map<std::uint32_t, std::string> hashes;
  for (const auto& [id, l] : links_) {
    if (l.a == l.b) invalid("link '" + id + "' is a self-loop on '" + l.a + "'");
    const Node* na = find_node(l.a);
    const Node* nb = find_node(l.b);
    if (!na) invalid("link '" + id + "' references unknown node '" + l.a + "'");
    if (!nb) invalid("link '" + id + "' references unknown node '" + l.b + "'");
    if (!(l.length_km >= 0.0)) invalid("link '" + id + "': length must be >= 0");
    profile_of(l);
    if (l.preshared_bytes < kDefaultAuthReserveBytes) {
      invalid("link '" + id + "': preshared bytes below the authentication reserve of " +
              std::to_string(kDefaultAuthReserveBytes));
    }
    int users = (na->kind == NodeKind::EndUser) + (nb->kind == NodeKind::EndUser);
    if (l.link_class == LinkClass::QbbFiber && users != 0) {
      invalid("QBB link '" + id + "' must connect two QBB nodes");
    }
    if (l.link_class != LinkClass::QbbFiber && users != 1) {
      invalid("QAN link '" + id + "' must have exactly one end-user endpoint");
    }
    auto [it, fresh] = hashes.emplace(fnv1a32(id), id);
    if (!fresh) invalid("link ids '" + it->second + "' and '" + id + "' collide in the LSA link hash");
  }

  for (const auto& [name, n] : nodes_) {
    if (n.kind == NodeKind::EndUser && links_of(name).size() != 1) {
      invalid("end user '" + name + "' must attach through exactly one access link");
    }
  }
  if (!connected()) invalid("topology is not connected");
}

Topology load_topology(std::string_view config_text) {
  Topology topo;
  for (const ConfigSection& s : parse_config_text(config_text)) {
    if (s.name == "node") {
      topo.add_node({s.require("name"), parse_kind(s.require("kind"))});
    } else if (s.name == "profile") {
      DeviceProfile p;
      p.id = s.require("id");
      p.r0_bps = s.require_double("r0_bps");
      p.alpha_db_per_km = s.require_double("alpha");
      p.max_length_km = s.require_double("max_km");
      p.restart_latency_s = s.require_double("restart_s");
      p.night_only = s.get_bool("night_only", false);
      topo.add_profile(std::move(p));
    } else if (s.name == "link") {
      LinkSpec l;
      l.id = s.require("id");
      l.a = s.require("a");
      l.b = s.require("b");
      l.length_km = s.require_double("km");
      l.profile = s.require("profile");
      l.link_class = parse_class(s.require("class"));
      l.preshared_bytes = s.require_u64("preshared");
      topo.add_link(std::move(l));
    } else {
      throw Error(Errc::ParseError, "unknown section [" + s.name + "] (line " + std::to_string(s.line) + ")");
    }
  }
  topo.validate();
  return topo;
}

Topology load_topology_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ValidationError, "cannot open topology file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_topology(buf.str());
}

std::string serialize_topology(const Topology& topology) {
  std::ostringstream out;
  for (const auto& [name, n] : topology.nodes()) {
    out << "[node] name=" << name << " kind=" << to_string(n.kind) << "\n";
  }
  for (const auto& [id, p] : topology.profiles()) {
    out << "[profile] id=" << id << " r0_bps=" << format_double(p.r0_bps) << " alpha=" << format_double(p.alpha_db_per_km)
        << " max_km=" << format_double(p.max_length_km) << " restart_s=" << format_double(p.restart_latency_s);
    if (p.night_only) out << " night_only=1";
    out << "\n";
  }
  for (const auto& [id, l] : topology.links()) {
    out << "[link] id=" << id << " a=" << l.a << " b=" << l.b << " km=" << format_double(l.length_km)
        << " profile=" << l.profile << " class=" << to_string(l.link_class) << " preshared=" << l.preshared_bytes
        << "\n";
  }
  return out.str();
}

Topology vienna_preset() {
  constexpr std::uint64_t kPreshared = 65536;
  Topology t;
  for (const char* name : {"SIE", "ERD", "GUD", "BREIT", "STP"}) t.add_node({name, NodeKind::QbbNode});
  t.add_node({"Alice", NodeKind::EndUser});
  t.add_node({"Bob", NodeKind::EndUser});

  // Device families of the backbone. Rates are illustrative; all QBB
  // families clear the 25 km deployment gate.
  t.add_profile({"idq_plug_play", 60000.0, 0.2, 50.0, 30.0, false});
  t.add_profile({"cow", 80000.0, 0.2, 60.0, 40.0, false});
  t.add_profile({"toshiba_decoy", 400000.0, 0.2, 100.0, 20.0, false});
  t.add_profile({"entangled_bbm92", 40000.0, 0.2, 40.0, 50.0, false});
  t.add_profile({"cv_homodyne", 100000.0, 0.3, 30.0, 45.0, false});
  t.add_profile({"freespace_lmu", 200000.0, 1.5, 3.0, 10.0, true});
  t.add_profile({"freespace_short", 150000.0, 1.5, 1.5, 10.0, true});

  auto qbb = [&](const char* a, const char* b, double km, const char* profile) {
    t.add_link({std::string(a) + "-" + b, a, b, km, profile, LinkClass::QbbFiber, kPreshared});
  };
  // Ring edges 17 + 15 + 16 + 15 = 63 km (split is synthetic).
  qbb("SIE", "ERD", 17.0, "idq_plug_play");
  qbb("ERD", "GUD", 15.0, "idq_plug_play");
  qbb("GUD", "BREIT", 16.0, "cow");
  qbb("BREIT", "SIE", 15.0, "entangled_bbm92");
  qbb("SIE", "GUD", 20.0, "idq_plug_play");
  qbb("ERD", "BREIT", 22.0, "cv_homodyne");
  qbb("BREIT", "STP", 85.0, "toshiba_decoy");

  t.add_link({"Alice-SIE", "Alice", "SIE", 3.0, "freespace_lmu", LinkClass::QanFreeSpace, kPreshared});
  t.add_link({"Bob-ERD", "Bob", "ERD", 1.0, "freespace_short", LinkClass::QanFreeSpace, kPreshared});
  t.validate();
  return t;
}

Topology building_block_preset() {
  constexpr std::uint64_t kPreshared = 65536;
  Topology t;
  for (const char* name : {"A", "B", "C", "D"}) t.add_node({name, NodeKind::QbbNode});
  t.add_node({"Alice", NodeKind::EndUser});
  t.add_node({"Bob", NodeKind::EndUser});
  t.add_profile({"backbone", 40000.0, 0.2, 50.0, 30.0, false});
  t.add_profile({"access", 100000.0, 0.2, 10.0, 10.0, false});

  auto qbb = [&](const char* id, const char* a, const char* b) {
    t.add_link({id, a, b, 25.0, "backbone", LinkClass::QbbFiber, kPreshared});
  };
  qbb("L1", "A", "C");
  qbb("L2", "C", "B");
  qbb("L3", "A", "D");
  qbb("L4", "D", "B");
  qbb("L5", "A", "B");
  qbb("L6", "C", "D");
  t.add_link({"LA", "Alice", "A", 2.0, "access", LinkClass::QanFiber, kPreshared});
  t.add_link({"LB", "Bob", "B", 2.0, "access", LinkClass::QanFiber, kPreshared});
  t.validate();
  return t;
}

Topology preset(std::string_view name) {
  if (name == "vienna") return vienna_preset();
  if (name == "block") return building_block_preset();
  throw Error(Errc::InvalidArgument, "unknown preset '" + std::string(name) + "' (expected vienna or block)");
}

std::uint64_t full_mesh_link_count(std::uint64_t n_users) {
  return n_users * (n_users - (n_users > 0 ? 1 : 0)) / 2;
}

std::uint64_t network_access_link_count(std::uint64_t n_users) { return n_users; }

}  // namespace qkdnet
