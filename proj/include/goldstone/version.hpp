#pragma once

#define GOLDSTONE_VERSION_MAJOR 0
#define GOLDSTONE_VERSION_MINOR 1
#define GOLDSTONE_VERSION_PATCH 0
#define GOLDSTONE_VERSION_STRING "0.1.0"
