import { Session } from "./session.js";
import { layoutFrame } from "./layout.js";
import { render } from "./render.js";
import { StreamConnection } from "./connect.js";

function boot(): void {
  const canvas = document.getElementById("circumplex") as HTMLCanvasElement | null;
  const errorCounter = document.getElementById("errors");
  if (!canvas) {
    throw new Error("missing #circumplex canvas");
  }
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    throw new Error("2d canvas context unavailable");
  }

  const session = new Session();
  let dirty = true;

  const scheme = location.protocol === "https:" ? "wss" : "ws";
  const connection = new StreamConnection(session, {
    url: `${scheme}://${location.host}/stream`,
    onChange: () => {
      dirty = true;
    },
  });

  const frame = () => {
    if (dirty) {
      dirty = false;
      const state = session.getState();
      const layout = layoutFrame(state, {
        width: canvas.width,
        height: canvas.height,
        labelGap: 0.18,
      });
      render(ctx, layout);
      if (errorCounter) {
        errorCounter.textContent =
          state.errors === 0 ? "" : `${state.errors} malformed frame${state.errors === 1 ? "" : "s"} dropped`;
      }
    }
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);

  connection.start();
}

boot();
