#pragma once

#define RINGLAW_VERSION_MAJOR 0
#define RINGLAW_VERSION_MINOR 1
#define RINGLAW_VERSION_PATCH 0
#define RINGLAW_VERSION "0.1.0"
