import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // Node environment on purpose: the round-trip test constructs its own
    // happy-dom Window and keeps node's fetch/FormData/crypto, which handle
    // real multipart uploads against the live service.
    environment: "node",
    include: ["test/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
