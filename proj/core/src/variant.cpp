#include "gite/model/variant.hpp"

#include <algorithm>
#include <cctype>

#include "gite/error.hpp"

namespace gite::model {
namespace {

struct Entry {
  Variant variant;
  const char* key;
  const char* label;
};

constexpr Entry kEntries[] = {
    {Variant::full, "full", "GITE"},       {Variant::nr, "nr", "GITE_NR"},
    {Variant::nb, "nb", "GITE_NB"},        {Variant::ns, "ns", "GITE_NS"},
    {Variant::nm, "nm", "GITE_NM"},        {Variant::natt, "natt", "GITE_NATT"},
    {Variant::na, "na", "GITE_NA"},        {Variant::np, "np", "GITE_NP"},
    {Variant::bs, "bs", "GITE_BS"},        {Variant::v, "v", "GITE_v"},
};

}  // namespace

Variant parse_variant(const std::string& text) {
  std::string key = text;
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (key.rfind("gite_", 0) == 0) key = key.substr(5);
  if (key == "gite") key = "full";
  for (const Entry& e : kEntries)
    if (key == e.key) return e.variant;
  throw ConfigError("unknown variant '" + text +
                    "' (expected full, nr, nb, ns, nm, natt, na, np, bs or v)");
}

std::string to_string(Variant v) {
  for (const Entry& e : kEntries)
    if (e.variant == v) return e.key;
  throw ConfigError("unknown variant");
}

std::string display_name(Variant v) {
  for (const Entry& e : kEntries)
    if (e.variant == v) return e.label;
  throw ConfigError("unknown variant");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> all = [] {
    std::vector<Variant> out;
    for (const Entry& e : kEntries) out.push_back(e.variant);
    return out;
  }();
  return all;
}

VariantTraits traits(Variant v) {
  VariantTraits t;
  switch (v) {
    case Variant::full:
      break;
    case Variant::nr:
      t.regularize = false;
      break;
    case Variant::nb:
      t.balance = false;
      break;
    case Variant::ns:
      t.wiring.structure_branch = false;
      t.wiring.amplifier = false;
      break;
    case Variant::nm:
      t.wiring.amplifier = false;
      break;
    case Variant::natt:
      t.wiring.weighting = layers::Weighting::uniform;
      break;
    case Variant::na:
      t.wiring.weighting = layers::Weighting::sum;
      break;
    case Variant::np:
      t.use_proxy = false;
      break;
    case Variant::bs:
      t.separate_balance = true;
      t.use_proxy = false;
      break;
    case Variant::v:
      t.proxy = balance::ProxyKind::mlp;
      t.reconstruction = true;
      break;
  }
  return t;
}

}  // namespace gite::model
