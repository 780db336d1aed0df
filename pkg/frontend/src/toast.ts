// Non-blocking notifications stacked in a corner; they time out on their
// own and never intercept pointer events.
export class ToastRack {
  container: HTMLElement;
  ttlMs: number;

  constructor(container: HTMLElement, ttlMs: number = 6000) {
    this.container = container;
    this.ttlMs = ttlMs;
  }

  show(message: string, kind: "info" | "error" = "info") {
    const el = document.createElement("div");
    el.className = `toast toast-${kind}`;
    el.textContent = message;
    this.container.appendChild(el);
    setTimeout(() => {
      if (el.parentNode === this.container) this.container.removeChild(el);
    }, this.ttlMs);
  }

  info(message: string) {
    this.show(message, "info");
  }

  error(message: string) {
    this.show(message, "error");
  }
}
