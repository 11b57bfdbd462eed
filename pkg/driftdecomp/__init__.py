from flask import Flask
from .config import Config


def create_app(config_class=Config):
    app = Flask(__name__)
    app.config.from_object(config_class)

    # Service modules log through children of the app logger
    app.logger.setLevel(app.config['LOG_LEVEL'])

    # Register blueprints (CLI commands only)
    from .blueprints.simulate import simulate_bp
    from .blueprints.fit import fit_bp
    from .blueprints.evaluate import evaluate_bp
    from .blueprints.export import export_bp

    app.register_blueprint(simulate_bp)
    app.register_blueprint(fit_bp)
    app.register_blueprint(evaluate_bp)
    app.register_blueprint(export_bp)

    return app
