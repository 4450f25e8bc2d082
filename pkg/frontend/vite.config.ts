import { defineConfig } from "vitest/config";

// base matches the mount point the service uses for static assets
export default defineConfig({
  base: "/ui/",
  build: { outDir: "dist", target: "es2020" },
  server: {
    proxy: {
      "/health": "http://127.0.0.1:8080",
      "/route": "http://127.0.0.1:8080",
      "/layer": "http://127.0.0.1:8080",
      "/compare": "http://127.0.0.1:8080",
    },
  },
  test: {
    environment: "jsdom",
  },
});
