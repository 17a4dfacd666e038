#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace qkdnet {

/// Authentication floor held back in every directional key store.
inline constexpr std::uint64_t kDefaultAuthReserveBytes = 4096;

enum class NodeKind { QbbNode, EndUser };
enum class LinkClass { QbbFiber, QanFiber, QanFreeSpace };

const char* to_string(NodeKind kind) noexcept;
const char* to_string(LinkClass cls) noexcept;

struct Node {
  std::string name;
  NodeKind kind = NodeKind::QbbNode;

  friend bool operator==(const Node&, const Node&) = default;
};

/// Secret-key source characteristics of one QKD device family.
struct DeviceProfile {
  std::string id;
  double r0_bps = 0.0;           // net secret-key rate at zero distance
  double alpha_db_per_km = 0.2;  // effective attenuation
  double max_length_km = 0.0;    // operating limit; rate is zero beyond it
  double restart_latency_s = 0.0;
  bool night_only = false;       // free-space optics: dark during day windows

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

struct LinkSpec {
  std::string id;
  std::string a;
  std::string b;
  double length_km = 0.0;
  std::string profile;
  LinkClass link_class = LinkClass::QbbFiber;
  std::uint64_t preshared_bytes = 0;

  bool touches(std::string_view node) const { return a == node || b == node; }
  const std::string& other(std::string_view node) const { return a == node ? b : a; }

  friend bool operator==(const LinkSpec&, const LinkSpec&) = default;
};

/// Graph of QBB nodes, end users and QKD links. Containers are keyed by name,
/// so equality is structural and independent of declaration order.
class Topology {
 public:
  void add_node(Node node);
  void add_profile(DeviceProfile profile);
  void add_link(LinkSpec link);

  // Throws Errc::ValidationError describing the first violated invariant.
  void validate() const;

  const std::map<std::string, Node>& nodes() const { return nodes_; }
  const std::map<std::string, LinkSpec>& links() const { return links_; }
  const std::map<std::string, DeviceProfile>& profiles() const { return profiles_; }

  const Node* find_node(std::string_view name) const;
  const LinkSpec* find_link(std::string_view id) const;
  const LinkSpec& link(std::string_view id) const;
  const DeviceProfile& profile_of(const LinkSpec& link) const;

  // Links incident to `node`, ordered by link id.
  std::vector<const LinkSpec*> links_of(std::string_view node) const;
  // The single access link of an end user, or nullptr for QBB nodes.
  const LinkSpec* access_link(std::string_view node) const;

  bool is_end_user(std::string_view node) const;
  bool connected(const std::set<std::string>& removed_links = {}) const;
  std::size_t count_links(LinkClass cls) const;
  std::size_t count_qan_links() const;

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  std::map<std::string, Node> nodes_;
  std::map<std::string, DeviceProfile> profiles_;
  std::map<std::string, LinkSpec> links_;
};

// Parses the sectioned `[node]` / `[profile]` / `[link]` grammar and
// validates the result. Errc::ParseError or Errc::ValidationError.
Topology load_topology(std::string_view config_text);
Topology load_topology_file(const std::filesystem::path& path);
std::string serialize_topology(const Topology& topology);

/// Five-station Vienna backbone: SIE/ERD/GUD/BREIT ring with both diagonals,
/// the 85 km spur to St. Poelten (STP), and two free-space access users.
Topology vienna_preset();

/// Four-node rectangle with diagonals plus two access users (Alice on A, Bob
/// on B). Links: LA, LB access; L5 = A-B; L1 = A-C, L2 = C-B; L3 = A-D,
/// L4 = D-B; L6 = C-D.
Topology building_block_preset();

// Throws Errc::InvalidArgument for unknown names ("vienna", "block").
Topology preset(std::string_view name);

std::uint64_t full_mesh_link_count(std::uint64_t n_users);
std::uint64_t network_access_link_count(std::uint64_t n_users);

}  // namespace qkdnet
