#pragma once

#include <map>
#include <string>

namespace mmsym {

// Catalog JSON files compiled into the library (generated at configure time).
const std::map<std::string, std::string>& embedded_catalog();

}  // namespace mmsym
