#pragma once

#include "ingest/cell_grid.hpp"

namespace straptor::t2t {

enum class CellKind { Empty, Number, Text, Other };

CellKind kind_of(const ingest::Cell* cell);

}  // namespace straptor::t2t
