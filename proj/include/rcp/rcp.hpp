#pragma once

#include "rcp/version.hpp"
#include "rcp/errors.hpp"
#include "rcp/model.hpp"
#include "rcp/stability.hpp"
#include "rcp/hopf.hpp"
#include "rcp/dde.hpp"
#include "rcp/packet_sim.hpp"
