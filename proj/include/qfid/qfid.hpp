// qfid.hpp
// Umbrella header.

#pragma once

#include "qfid/errors.hpp"
#include "qfid/io.hpp"
#include "qfid/linalg.hpp"
#include "qfid/meanfit.hpp"
#include "qfid/measures.hpp"
#include "qfid/protocol.hpp"
#include "qfid/random.hpp"
#include "qfid/secondorder.hpp"
#include "qfid/states.hpp"
